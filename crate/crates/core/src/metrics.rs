//! Distinguishability measures between states.

use alloc::format;

use num_traits::Float;

use crate::error::domain;
use crate::matcore::{check_same_dim, eig_hermitian_raw, inner, spectral_apply, vec_norm, ComplexMatrix, HermitianOperator};
use crate::states::DensityMatrix;
use crate::{Error, Result, C64};

/// Relative tolerance on equal purities for Θ and Φ.
pub const PURITY_TOL: f64 = 1e-8;
/// Overshoot tolerated on an arccos argument before it is treated as an error.
pub const ACOS_TOL: f64 = 1e-12;

/// arccos with the argument clamped to [−1, 1] once it is within [`ACOS_TOL`] of the range.
pub fn acos_clamped(x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0 + ACOS_TOL) {
        return Err(domain(format!("arccos argument {x} outside [-1, 1]")));
    }
    Ok(x.clamp(-1.0, 1.0).acos())
}

/// d_FS = arccos |⟨ψ|φ⟩| for unit vectors.
pub fn fubini_study(psi: &[C64], phi: &[C64]) -> Result<f64> {
    check_same_dim(psi.len(), phi.len())?;
    for v in [psi, phi] {
        if (vec_norm(v) - 1.0).abs() > 1e-10 {
            return Err(domain("Fubini-Study distance needs unit vectors"));
        }
    }
    Ok(inner(psi, phi).norm().min(1.0).acos())
}

/// Root fidelity F = tr √(√ρ σ √ρ) ∈ [0, 1].
///
/// Eigenvalues of ρ and of √ρσ√ρ below the roundoff floor `16·d·ε·λ_max` are treated as
/// exact zeros; their square roots would otherwise add O(√ε) noise for rank-deficient input.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho.dim(), sigma.dim())?;
    let floor = |vals: &[f64]| {
        let max = vals.iter().fold(0.0f64, |m, &x| m.max(x));
        16.0 * vals.len() as f64 * f64::EPSILON * max
    };
    let cut = floor(rho.spectrum());
    let s = spectral_apply(rho.spectrum(), rho.eigenvectors().matrix(), |x| {
        C64::new(if x > cut { x.sqrt() } else { 0.0 }, 0.0)
    });
    let m = &s * &(sigma.matrix() * &s);
    let (vals, _) = eig_hermitian_raw(&m.hermitized())?;
    let cut = floor(&vals);
    let f: f64 = vals.iter().filter(|&&x| x > cut).map(|&x| x.sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Bures angle ℒ = arccos F ∈ [0, π/2].
pub fn bures_angle(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    Ok(fidelity(rho, sigma)?.acos())
}

fn check_equal_purity(x: f64, y: f64) -> Result<()> {
    if (x - y).abs() > PURITY_TOL * x.max(y) {
        return Err(domain(format!("purities {x} and {y} differ")));
    }
    Ok(())
}

/// Generalized Bloch angle Θ = arccos((d tr[ρσ] − 1)/(d tr[ρ²] − 1)) ∈ [0, π],
/// defined for states of equal purity. Evaluated as the angle between the traceless parts
/// ρ − 𝟙/d and σ − 𝟙/d, which is the same expression on its domain without the cancellation
/// in d tr[ρ²] − 1.
pub fn gba_theta(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho.dim(), sigma.dim())?;
    let d = rho.dim();
    check_equal_purity(rho.purity(), sigma.purity())?;
    let id = ComplexMatrix::identity(d).scale_re(1.0 / d as f64);
    let (a, b) = (rho.matrix() - &id, sigma.matrix() - &id);
    let (na, nb) = (a.trace_product(&a).re, b.trace_product(&b).re);
    if d as f64 * na < 1e-12 || d as f64 * nb < 1e-12 {
        return Err(Error::UndefinedAngle);
    }
    acos_clamped(a.trace_product(&b).re / (na * nb).sqrt())
}

/// Φ = arccos √(tr[ρσ]/tr[ρ²]) ∈ [0, π/2], for states of equal purity.
pub fn phi_angle(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho.dim(), sigma.dim())?;
    let d = rho.dim() as f64;
    let (x, y, z) = (rho.purity(), sigma.purity(), rho.overlap(sigma));
    check_equal_purity(x, y)?;
    if d * x - 1.0 < 1e-12 {
        return Err(Error::UndefinedAngle);
    }
    acos_clamped((z.max(0.0) / (x * y).sqrt()).sqrt())
}

/// ‖ρ − σ‖_HS
pub fn hs_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho.dim(), sigma.dim())?;
    Ok((rho.matrix() - sigma.matrix()).hs_norm())
}

/// Euclidean distance between Bloch vectors, D = ‖r − s‖ = √(d/(d−1)) ‖ρ − σ‖_HS.
pub fn euclid_d(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let d = rho.dim() as f64;
    Ok((d / (d - 1.0)).sqrt() * hs_distance(rho, sigma)?)
}

/// Sub-fidelity E = √(tr[ρσ] + √(2((tr ρσ)² − tr[ρσρσ]))), a lower bound on F.
pub fn sub_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho.dim(), sigma.dim())?;
    let z = rho.overlap(sigma);
    let rs = rho.matrix() * sigma.matrix();
    let beta = rs.trace_product(&rs).re;
    Ok(sub_fidelity_from(z, beta))
}

/// Sub-fidelity from z = tr[ρσ] and β = tr[ρσρσ].
pub fn sub_fidelity_from(z: f64, beta: f64) -> f64 {
    (z + (2.0 * (z * z - beta)).max(0.0).sqrt()).max(0.0).sqrt()
}

/// Affinity tr[√ρ √σ].
pub fn affinity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho.dim(), sigma.dim())?;
    Ok(rho.sqrt().matrix().trace_product(sigma.sqrt().matrix()).re.clamp(0.0, 1.0))
}

/// tr[ρσ]/tr[ρ²]
pub fn relative_purity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho.dim(), sigma.dim())?;
    Ok(rho.overlap(sigma) / rho.purity())
}

/// Standard deviation of a Hermitian operator in a state.
pub fn std_dev(h: &HermitianOperator, rho: &DensityMatrix) -> f64 {
    let m = h.matrix();
    let e1 = rho.expect(h);
    let e2 = rho.matrix().trace_product(&(m * m)).re;
    (e2 - e1 * e1).max(0.0).sqrt()
}
