//! Density matrices, generalized Bloch vectors, purity, entropy and Gibbs states.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::domain;
use crate::matcore::{
    check_same_dim, eig_hermitian, kron, spectral_apply, ComplexMatrix, HermitianOperator, UnitaryMatrix,
};
use crate::{Error, Result, C64};

/// Trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues in [−PSD_REPAIR, 0) are clamped to zero on construction.
pub const PSD_REPAIR: f64 = 1e-10;
/// Tolerance on the reconstruction of a state from a Bloch vector.
pub const BLOCH_PSD_TOL: f64 = 1e-8;

/// A d×d Hermitian, positive semidefinite, unit-trace operator.
///
/// The spectrum is computed once at construction (it is needed for validation anyway)
/// and shared by every later query.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    op: HermitianOperator,
    eigvals: Vec<f64>,
    eigvecs: UnitaryMatrix,
}

impl DensityMatrix {
    /// Validates trace and positivity. Eigenvalues in [−1e-10, 0) are clamped to zero and the
    /// result renormalized; anything more negative is rejected.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let op = HermitianOperator::new(m)?;
        let tr = op.matrix().trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotAState(format!("trace {tr}")));
        }
        Self::from_operator(op, PSD_REPAIR)
    }

    /// Divides by the trace first.
    pub fn normalized(m: ComplexMatrix) -> Result<Self> {
        let tr = m.trace().re;
        if !(tr > 0.0) {
            return Err(Error::NotAState(format!("trace {tr}")));
        }
        let op = HermitianOperator::new(m.scale_re(1.0 / tr))?;
        Self::from_operator(op, PSD_REPAIR)
    }

    fn from_operator(op: HermitianOperator, neg_tol: f64) -> Result<Self> {
        let (vals, vecs) = eig_hermitian(&op)?;
        let min = vals.first().copied().unwrap_or(0.0);
        if min < -neg_tol {
            return Err(Error::NotPsd(min));
        }
        if min < 0.0 {
            let clamped: Vec<f64> = vals.iter().map(|&x| x.max(0.0)).collect();
            let s: f64 = clamped.iter().sum();
            let clamped: Vec<f64> = clamped.iter().map(|x| x / s).collect();
            let m = spectral_apply(&clamped, vecs.matrix(), |x| C64::new(x, 0.0));
            return Ok(Self { op: HermitianOperator::hermitize(&m), eigvals: clamped, eigvecs: vecs });
        }
        Ok(Self { op, eigvals: vals, eigvecs: vecs })
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let nrm = crate::matcore::vec_norm(psi);
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(domain("state vector must be nonzero and finite"));
        }
        let v: Vec<C64> = psi.iter().map(|z| z / nrm).collect();
        Self::new(ComplexMatrix::outer(&v, &v))
    }

    /// Diagonal state from a probability vector.
    pub fn from_diag(p: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_real_diag(p))
    }

    /// Σ λ_k |v_k⟩⟨v_k| with the columns of `vecs` kept as the eigenbasis. `vals` must be
    /// ascending, nonnegative and sum to one.
    pub fn from_spectral(vals: &[f64], vecs: UnitaryMatrix) -> Result<Self> {
        check_same_dim(vals.len(), vecs.dim())?;
        if vals.windows(2).any(|w| w[1] < w[0]) {
            return Err(domain("eigenvalues must be ascending"));
        }
        if vals.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::NotAState("negative or non-finite eigenvalue".into()));
        }
        let tr: f64 = vals.iter().sum();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotAState(format!("trace {tr}")));
        }
        let m = spectral_apply(vals, vecs.matrix(), |x| C64::new(x, 0.0));
        Ok(Self { op: HermitianOperator::hermitize(&m), eigvals: vals.to_vec(), eigvecs: vecs })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        let op = HermitianOperator::identity(d).scale(1.0 / d as f64);
        Self::from_operator(op, PSD_REPAIR).expect("identity is a state")
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.op.matrix()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    /// Eigenvalues, ascending.
    pub fn spectrum(&self) -> &[f64] {
        &self.eigvals
    }

    /// Eigenvectors as columns, in the order of [`spectrum`](Self::spectrum).
    pub fn eigenvectors(&self) -> &UnitaryMatrix {
        &self.eigvecs
    }

    pub fn purity(&self) -> f64 {
        purity(self)
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        (self.purity() - 1.0).abs() <= tol
    }

    /// U ρ U†
    ///
    /// The spectrum is carried over and the eigenvectors rotated, so no new
    /// eigendecomposition is needed.
    pub fn conjugate_by(&self, u: &UnitaryMatrix) -> Result<Self> {
        check_same_dim(self.dim(), u.dim())?;
        let vecs = UnitaryMatrix::trusted(u.matrix() * self.eigvecs.matrix());
        let m = spectral_apply(&self.eigvals, vecs.matrix(), |x| C64::new(x, 0.0));
        Ok(Self { op: HermitianOperator::hermitize(&m), eigvals: self.eigvals.clone(), eigvecs: vecs })
    }

    /// ρ ⊗ σ
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Self::normalized(kron(self.matrix(), other.matrix()))
    }

    /// ⊗ⁿ ρ
    pub fn tensor_power(&self, n: usize) -> Result<Self> {
        Self::normalized(crate::matcore::kron_power(self.matrix(), n))
    }

    /// √ρ from the cached spectrum.
    pub fn sqrt(&self) -> HermitianOperator {
        HermitianOperator::hermitize(&spectral_apply(&self.eigvals, self.eigvecs.matrix(), |x| {
            C64::new(x.max(0.0).sqrt(), 0.0)
        }))
    }

    /// tr[ρσ]
    pub fn overlap(&self, other: &Self) -> f64 {
        self.matrix().trace_product(other.matrix()).re
    }

    /// Expectation tr[ρA] of a Hermitian operator.
    pub fn expect(&self, a: &HermitianOperator) -> f64 {
        self.matrix().trace_product(a.matrix()).re
    }
}

/// tr[ρ²]
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.matrix().trace_product(rho.matrix()).re
}

/// −tr[ρ log ρ] with 0 log 0 = 0 (natural log).
pub fn vn_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of(rho.spectrum())
}

pub(crate) fn entropy_of(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// d²−1 traceless Hermitian generators with tr[ΛᵢΛⱼ] = 2δᵢⱼ.
#[derive(Clone, Debug)]
pub struct GeneratorBasis {
    d: usize,
    ops: Vec<HermitianOperator>,
}

impl GeneratorBasis {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn operators(&self) -> &[HermitianOperator] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// √(d(d−1)/2)
    pub fn c(&self) -> f64 {
        let d = self.d as f64;
        (d * (d - 1.0) / 2.0).sqrt()
    }
}

/// Generalized Gell-Mann matrices ordered as symmetric, antisymmetric, then diagonal blocks;
/// the off-diagonal blocks run over pairs j < k lexicographically.
pub fn gell_mann_basis(d: usize) -> Result<GeneratorBasis> {
    if d < 2 {
        return Err(domain("Gell-Mann basis needs d >= 2"));
    }
    let mut ops = Vec::with_capacity(d * d - 1);
    for j in 0..d {
        for k in j + 1..d {
            let mut m = ComplexMatrix::zeros(d);
            m[(j, k)] = C64::new(1.0, 0.0);
            m[(k, j)] = C64::new(1.0, 0.0);
            ops.push(HermitianOperator::hermitize(&m));
        }
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut m = ComplexMatrix::zeros(d);
            m[(j, k)] = C64::new(0.0, -1.0);
            m[(k, j)] = C64::new(0.0, 1.0);
            ops.push(HermitianOperator::hermitize(&m));
        }
    }
    for l in 1..d {
        let s = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut diag = alloc::vec![0.0; d];
        for x in diag.iter_mut().take(l) {
            *x = s;
        }
        diag[l] = -(l as f64) * s;
        ops.push(HermitianOperator::from_real_diag(&diag));
    }
    Ok(GeneratorBasis { d, ops })
}

/// Generalized Bloch vector: ρ = (𝟙 + c r·Λ)/d with c = √(d(d−1)/2).
#[derive(Clone, Debug, PartialEq)]
pub struct BlochVector {
    pub d: usize,
    pub r: Vec<f64>,
}

impl BlochVector {
    pub const BASIS: &'static str = "gellmann";

    pub fn norm(&self) -> f64 {
        self.r.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.r.iter().zip(&other.r).map(|(a, b)| a * b).sum()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.r.iter().zip(&other.r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

pub fn to_bloch(rho: &DensityMatrix, basis: &GeneratorBasis) -> Result<BlochVector> {
    check_same_dim(rho.dim(), basis.d)?;
    let d = basis.d as f64;
    let k = d / (2.0 * basis.c());
    let r = basis.ops.iter().map(|l| k * rho.expect(l)).collect();
    Ok(BlochVector { d: basis.d, r })
}

pub fn from_bloch(r: &BlochVector, basis: &GeneratorBasis) -> Result<DensityMatrix> {
    check_same_dim(r.d, basis.d)?;
    if r.r.len() != basis.len() {
        return Err(crate::error::shape(format!("{} components for d = {}", r.r.len(), r.d)));
    }
    let d = basis.d as f64;
    let c = basis.c();
    let mut m = ComplexMatrix::identity(basis.d);
    for (x, l) in r.r.iter().zip(&basis.ops) {
        m = &m + &l.matrix().scale_re(c * x);
    }
    let op = HermitianOperator::hermitize(&m.scale_re(1.0 / d));
    DensityMatrix::from_operator(op, BLOCH_PSD_TOL).map_err(|e| match e {
        Error::NotPsd(x) => Error::NotAState(format!("Bloch vector outside the state space (eigenvalue {x:e})")),
        other => other,
    })
}

/// ‖r‖ = √((d tr ρ² − 1)/(d − 1)), from the purity alone.
pub fn bloch_radius_from_purity(purity: f64, d: usize) -> f64 {
    let d = d as f64;
    ((d * purity - 1.0) / (d - 1.0)).max(0.0).sqrt()
}

/// 𝒢_β = exp(−βH₀)/Z.
pub fn gibbs_state(h0: &HermitianOperator, beta: f64) -> Result<DensityMatrix> {
    crate::matcore::check_finite_real(beta, "beta")?;
    let (vals, vecs) = eig_hermitian(h0)?;
    let w = boltzmann_weights(&vals, beta);
    DensityMatrix::new(spectral_apply(&w, vecs.matrix(), |x| C64::new(x, 0.0)))
}

/// Normalized Boltzmann weights for the given levels.
pub fn boltzmann_weights(levels: &[f64], beta: f64) -> Vec<f64> {
    let shift = if beta >= 0.0 {
        levels.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        levels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    };
    let w: Vec<f64> = levels.iter().map(|&e| (-beta * (e - shift)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Which side of β = 0 to search when matching an entropy; the entropy is symmetric in
/// the sign of β only for symmetric spectra, so the two branches differ in general.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TemperatureBranch {
    #[default]
    Positive,
    Negative,
}

/// Upper end of the β bracket.
pub const BETA_MAX: f64 = 1e3;

/// Finds β̄ ≥ 0 with S(𝒢_β̄) = S_target by bisection; see
/// [`gibbs_matching_entropy_branch`] for negative temperatures.
pub fn gibbs_matching_entropy(h0: &HermitianOperator, s_target: f64) -> Result<(DensityMatrix, f64)> {
    gibbs_matching_entropy_branch(h0, s_target, TemperatureBranch::Positive)
}

pub fn gibbs_matching_entropy_branch(
    h0: &HermitianOperator,
    s_target: f64,
    branch: TemperatureBranch,
) -> Result<(DensityMatrix, f64)> {
    let d = h0.dim();
    let log_d = (d as f64).ln();
    if !(s_target > 0.0 && s_target < log_d) {
        return Err(domain(format!("target entropy {s_target} outside (0, log {d})")));
    }
    let levels = h0.eigenvalues()?;
    let sign = match branch {
        TemperatureBranch::Positive => 1.0,
        TemperatureBranch::Negative => -1.0,
    };
    let s_at = |b: f64| entropy_of(&boltzmann_weights(&levels, sign * b));
    // S decreases monotonically in |β| along either branch
    let (mut lo, mut hi) = (0.0f64, BETA_MAX);
    if s_at(hi) > s_target {
        return Err(domain(format!("target entropy {s_target} not reachable with |beta| <= {BETA_MAX}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if s_at(mid) > s_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    let beta = sign * 0.5 * (lo + hi);
    let s = s_at(beta.abs());
    if (s - s_target).abs() > 1e-8 {
        return Err(Error::NoConvergence("entropy bisection"));
    }
    Ok((gibbs_state(h0, beta)?, beta))
}

/// ε ρ + (1 − ε) φ
pub fn mix_with(rho: &DensityMatrix, phi: &DensityMatrix, eps: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(domain(format!("mixing weight {eps} outside [0, 1]")));
    }
    check_same_dim(rho.dim(), phi.dim())?;
    DensityMatrix::normalized(&rho.matrix().scale_re(eps) + &phi.matrix().scale_re(1.0 - eps))
}
