//! Quantum speed limits for unitary and open evolution, an iterative solver for
//! the unconstrained unitary brachistochrone between isospectral states, and
//! work/power bounds for arrays of quantum batteries.
//!
//! The crate is `no_std` and only needs `alloc`. Units are natural (ħ = 1).
//!
//! ```
//! use qsl_core::states::DensityMatrix;
//! use qsl_core::metrics::bures_angle;
//!
//! let zero = DensityMatrix::from_diag(&[1.0, 0.0]).unwrap();
//! let one = DensityMatrix::from_diag(&[0.0, 1.0]).unwrap();
//! let l = bures_angle(&zero, &one).unwrap();
//! assert!((l - core::f64::consts::FRAC_PI_2).abs() < 1e-12);
//! ```
#![no_std]
// `num_traits::Float` imports go unused whenever std is linked into the same build
#![allow(unused_imports)]

extern crate alloc;

pub mod batteries;
pub mod bounds;
pub mod brachistochrone;
pub mod dynamics;
pub mod ensembles;
mod error;
pub mod matcore;
pub mod metrics;
pub mod states;

#[cfg(test)]
extern crate std;
#[cfg(test)]
mod test_util;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Reduced Planck constant. Everything in the crate works in units where it is one;
/// multiply a reported time by `HBAR` in your own units to rescale.
pub const HBAR: f64 = 1.0;
