//! Reproducible random sampling: Ginibre matrices, Haar unitaries, Bures states and
//! random Hamiltonians.
//!
//! Every draw comes from a [`SampleStream`], identified by `(seed, stream, counter)`.
//! The triple fully determines the sequence, so a sweep can give each sample its own
//! counter and be evaluated in any order or on any number of threads.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::domain;
use crate::matcore::{matrix_log_unitary, spectral_apply, ComplexMatrix, HermitianOperator, UnitaryMatrix};
use crate::states::DensityMatrix;
use crate::{Result, C64};

/// Name of the generator, written into every output file.
pub const GENERATOR: &str = "chacha8(key=splitmix64(seed,counter),stream=id)+box-muller";

fn splitmix64(x: &mut u64) -> u64 {
    *x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-addressed random stream.
#[derive(Clone, Debug)]
pub struct SampleStream {
    seed: u64,
    stream: u64,
    counter: u64,
    rng: ChaCha8Rng,
    spare: Option<f64>,
    resamples: u64,
}

impl SampleStream {
    pub fn new(seed: u64, stream: u64, counter: u64) -> Self {
        let mut key = [0u8; 32];
        let mut a = seed;
        let mut b = counter ^ 0xD1B5_4A32_D192_ED03;
        let words = [splitmix64(&mut a), splitmix64(&mut a), splitmix64(&mut b), splitmix64(&mut b)];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream);
        Self { seed, stream, counter, rng, spare: None, resamples: 0 }
    }

    /// Stream for sample `counter` of the same `(seed, stream)` family.
    pub fn at(&self, counter: u64) -> Self {
        Self::new(self.seed, self.stream, counter)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Number of measure-zero rejections performed by [`bures_state`] on this stream.
    pub fn resamples(&self) -> u64 {
        self.resamples
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate (Box-Muller; both outputs are used).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * core::f64::consts::PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn complex_normal(&mut self) -> C64 {
        let re = self.normal();
        let im = self.normal();
        C64::new(re, im)
    }
}

/// d×d matrix with independent entries x + iy, x, y ~ N(0, 1).
pub fn ginibre(d: usize, s: &mut SampleStream) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, |_, _| s.complex_normal())
}

/// Householder QR. Returns Q and the diagonal of R.
fn householder_qr(a: &ComplexMatrix) -> (ComplexMatrix, Vec<C64>) {
    let n = a.dim();
    let mut r = a.clone();
    let mut q = ComplexMatrix::identity(n);
    for k in 0..n.saturating_sub(1) {
        let mut v: Vec<C64> = (k..n).map(|i| r[(i, k)]).collect();
        let xnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() == 0.0 { C64::new(1.0, 0.0) } else { x0 / x0.norm() };
        v[0] = x0 + phase * xnorm;
        let beta = 2.0 / v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        for j in 0..n {
            let s: C64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * r[(k + i, j)]).sum::<C64>() * beta;
            for (i, vi) in v.iter().enumerate() {
                r[(k + i, j)] -= vi * s;
            }
        }
        for i in 0..n {
            let s: C64 = v.iter().enumerate().map(|(j, vj)| q[(i, k + j)] * vj).sum::<C64>() * beta;
            for (j, vj) in v.iter().enumerate() {
                q[(i, k + j)] -= s * vj.conj();
            }
        }
    }
    let diag = r.diagonal();
    (q, diag)
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of R's diagonal moved
/// into Q so that R_ii > 0.
pub fn haar_unitary(d: usize, s: &mut SampleStream) -> UnitaryMatrix {
    let z = ginibre(d, s);
    let (mut q, rdiag) = householder_qr(&z);
    for (j, rjj) in rdiag.iter().enumerate() {
        let ph = if rjj.norm() == 0.0 { C64::new(1.0, 0.0) } else { rjj / rjj.norm() };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    UnitaryMatrix::new(q).expect("Householder QR yields a unitary factor")
}

/// Random pure state: first column of a Haar unitary (uniform on the sphere).
pub fn haar_state_vector(d: usize, s: &mut SampleStream) -> Vec<C64> {
    let v: Vec<C64> = (0..d).map(|_| s.complex_normal()).collect();
    let nrm = crate::matcore::vec_norm(&v);
    v.into_iter().map(|z| z / nrm).collect()
}

/// State distributed according to the Bures measure:
/// ρ = (𝟙 + U) A A† (𝟙 + U†) / tr[…], A Ginibre and U Haar.
pub fn bures_state(d: usize, s: &mut SampleStream) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(domain("Bures sampling needs d >= 2"));
    }
    loop {
        let a = ginibre(d, s);
        let u = haar_unitary(d, s);
        let one_plus_u = &ComplexMatrix::identity(d) + u.matrix();
        let m = &one_plus_u * &a;
        let p = &m * &m.dagger();
        let tr = p.trace().re;
        if tr < 1e-14 {
            s.resamples += 1;
            continue;
        }
        return DensityMatrix::normalized(p);
    }
}

/// H = i log U with U Haar; eigenvalues lie on the principal branch.
pub fn random_hamiltonian(d: usize, s: &mut SampleStream) -> Result<HermitianOperator> {
    if d < 2 {
        return Err(domain("random Hamiltonian needs d >= 2"));
    }
    Ok(matrix_log_unitary(&haar_unitary(d, s))?.h)
}

/// Spectrum layout for [`isospectral_pair`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpectrumMode {
    /// Rank-one states.
    Pure,
    /// Spectrum of a Bures-random state.
    Mixed,
    /// Random distinct eigenvalues repeated with the given multiplicities (in descending order of value).
    Multiplicities(Vec<usize>),
}

/// ρ and σ = VρV† built from the same eigenvalue list.
#[derive(Clone, Debug)]
pub struct IsospectralPair {
    pub rho: DensityMatrix,
    pub sigma: DensityMatrix,
    /// Shared eigenvalues, in the order used to build both states.
    pub spectrum: Vec<f64>,
    pub v: UnitaryMatrix,
}

pub fn isospectral_pair(d: usize, s: &mut SampleStream, mode: &SpectrumMode) -> Result<IsospectralPair> {
    let spectrum: Vec<f64> = match mode {
        SpectrumMode::Pure => {
            let mut p = alloc::vec![0.0; d];
            p[0] = 1.0;
            p
        }
        SpectrumMode::Mixed => {
            let b = bures_state(d, s)?;
            let mut p: Vec<f64> = b.spectrum().iter().map(|x| x.max(0.0)).collect();
            p.reverse();
            let t: f64 = p.iter().sum();
            p.iter().map(|x| x / t).collect()
        }
        SpectrumMode::Multiplicities(m) => {
            if m.iter().sum::<usize>() != d || m.contains(&0) {
                return Err(domain(format!("multiplicities {m:?} do not sum to {d}")));
            }
            // distinct values from sorted exponential spacings
            let mut vals: Vec<f64> = Vec::with_capacity(m.len());
            let mut acc = 0.0;
            for _ in 0..m.len() {
                acc += 0.1 + (-(1.0 - s.uniform()).ln());
                vals.push(acc);
            }
            vals.reverse();
            let mut p = Vec::with_capacity(d);
            for (v, &k) in vals.iter().zip(m) {
                for _ in 0..k {
                    p.push(*v);
                }
            }
            let t: f64 = p.iter().sum();
            p.iter().map(|x| x / t).collect()
        }
    };
    let w = haar_unitary(d, s);
    let v = haar_unitary(d, s);
    let vw = v.compose(&w);
    let rho = DensityMatrix::new(spectral_apply(&spectrum, w.matrix(), |x| C64::new(x, 0.0)))?;
    let sigma = DensityMatrix::new(spectral_apply(&spectrum, vw.matrix(), |x| C64::new(x, 0.0)))?;
    Ok(IsospectralPair { rho, sigma, spectrum, v })
}
