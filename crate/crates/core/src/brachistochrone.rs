//! Iterative search for efficient time-independent Hamiltonians between isospectral states.
//!
//! A connecting gate O with ρ → OρO† = σ is refined by repeatedly stripping the part of
//! H = i log O that commutes with ρ (the "parallel" part). Every iterate still maps ρ to σ
//! exactly; the fixed points are Hamiltonians with no parallel component.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;
use core::str::FromStr;

use num_traits::{Euclid, Float};

use crate::bounds::bound_unified_mixed;
use crate::dynamics::{commutator_variance, std_energy, unitary_orbit};
use crate::ensembles::{bures_state, random_hamiltonian, SampleStream};
use crate::error::domain;
use crate::matcore::{matrix_exp_skewh, matrix_log_unitary, principal_arg, ComplexMatrix, HermitianOperator, UnitaryMatrix};
use crate::states::DensityMatrix;
use crate::{Error, Result, C64};

const TAU: f64 = 2.0 * core::f64::consts::PI;

/// Relative tolerance for treating two eigenvalues as equal in the mask.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Largest eigenvalue mismatch accepted for an isospectral pair.
pub const ISOSPECTRAL_TOL: f64 = 1e-8;
/// Every iterate must send ρ to σ within this HS distance.
pub const EXACT_ENDPOINT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 1000;
pub const DEFAULT_EPS_PURE: f64 = 1e-4;
pub const DEFAULT_EPS_MIXED: f64 = 1e-2;

/// Phases φ_k, stored in [0, 2π).
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseVector(Vec<f64>);

impl PhaseVector {
    pub fn new(phases: &[f64]) -> Self {
        Self(phases.iter().map(|&p| Euclid::rem_euclid(&p, &TAU)).collect())
    }

    pub fn zeros(d: usize) -> Self {
        Self(alloc::vec![0.0; d])
    }

    /// Uniform on [0, 2π)^d.
    pub fn random(d: usize, s: &mut SampleStream) -> Self {
        Self((0..d).map(|_| TAU * s.uniform()).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn neg(&self) -> Self {
        Self::new(&self.0.iter().map(|p| -p).collect::<Vec<_>>())
    }

    /// φ_k − φ_1 in (−π, π]: the point on the (d−1)-torus once the global phase is dropped.
    pub fn relative(&self) -> Vec<f64> {
        let Some(&first) = self.0.first() else { return Vec::new() };
        self.0[1..].iter().map(|&p| wrap_pi(p - first)).collect()
    }
}

fn wrap_pi(x: f64) -> f64 {
    let y = Euclid::rem_euclid(&x, &TAU);
    if y > core::f64::consts::PI {
        y - TAU
    } else {
        y
    }
}

/// Which side of the gate each iteration corrects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// O ← O e^{iM_ρ[H]}
    Forward,
    /// O ← e^{iM_σ[H]} O
    Backward,
    /// O ← e^{iM_σ[H]/2} O e^{iM_ρ[H]/2}
    TwoSided,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Forward, Variant::Backward, Variant::TwoSided];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Forward => "forward",
            Variant::Backward => "backward",
            Variant::TwoSided => "two-sided",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| domain(format!("unknown variant {s:?}")))
    }
}

/// Index ranges of equal eigenvalues in an ascending spectrum.
pub fn degenerate_groups(spectrum: &[f64]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=spectrum.len() {
        let split = i == spectrum.len() || {
            let (a, b) = (spectrum[i - 1], spectrum[i]);
            (b - a).abs() > DEGENERACY_TOL * a.abs().max(1.0)
        };
        if split {
            out.push(start..i);
            start = i;
        }
    }
    out
}

fn group_labels(spectrum: &[f64]) -> Vec<usize> {
    let mut lab = alloc::vec![0; spectrum.len()];
    for (g, r) in degenerate_groups(spectrum).into_iter().enumerate() {
        for i in r {
            lab[i] = g;
        }
    }
    lab
}

/// Projection of H onto the operators commuting with ρ: D(M ∘ D†HD)D† with M_ij = 1 iff λ_i = λ_j.
pub fn mask(h: &HermitianOperator, rho: &DensityMatrix) -> HermitianOperator {
    let d = rho.eigenvectors().matrix();
    let lab = group_labels(rho.spectrum());
    let mut t = &(&d.dagger() * h.matrix()) * d;
    let n = t.dim();
    for i in 0..n {
        for j in 0..n {
            if lab[i] != lab[j] {
                t[(i, j)] = C64::new(0.0, 0.0);
            }
        }
    }
    HermitianOperator::hermitize(&(&(d * &t) * &d.dagger()))
}

/// Σ_k e^{iφ_k} |s_k⟩⟨r_k| for explicit bases (columns of `r` and `s`).
pub fn connect_in_bases(r: &UnitaryMatrix, s: &UnitaryMatrix, phi: &PhaseVector) -> Result<UnitaryMatrix> {
    if r.dim() != s.dim() || r.dim() != phi.len() {
        return Err(Error::Shape(format!("bases {} and {}, phases {}", r.dim(), s.dim(), phi.len())));
    }
    let ph: Vec<C64> = phi.as_slice().iter().map(|&p| C64::from_polar(1.0, p)).collect();
    let sd = ComplexMatrix::from_fn(s.dim(), |i, k| s.matrix()[(i, k)] * ph[k]);
    UnitaryMatrix::new(&sd * &r.matrix().dagger())
}

fn check_isospectral(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Shape(format!("dimensions {} and {}", rho.dim(), sigma.dim())));
    }
    let gap = rho.spectrum().iter().zip(sigma.spectrum()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if gap > ISOSPECTRAL_TOL {
        return Err(domain(format!("states are not isospectral (gap {gap:e})")));
    }
    let (gr, gs) = (degenerate_groups(rho.spectrum()), degenerate_groups(sigma.spectrum()));
    if gr != gs {
        return Err(domain("eigenvalue multiplicities differ"));
    }
    Ok(())
}

/// O(φ) = Σ_k e^{iφ_k}|s_k⟩⟨r_k| in the eigenbases of ρ and σ (ascending eigenvalues).
/// Degenerate blocks use the identity between the two computed bases.
pub fn connect_unitary(rho: &DensityMatrix, sigma: &DensityMatrix, phi: &PhaseVector) -> Result<UnitaryMatrix> {
    check_isospectral(rho, sigma)?;
    connect_in_bases(rho.eigenvectors(), sigma.eigenvectors(), phi)
}

/// As [`connect_unitary`], with one unitary per degenerate group (in group order) mixing the
/// basis vectors inside that group.
pub fn connect_unitary_blocks(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    phi: &PhaseVector,
    blocks: &[UnitaryMatrix],
) -> Result<UnitaryMatrix> {
    check_isospectral(rho, sigma)?;
    let groups = degenerate_groups(rho.spectrum());
    if blocks.len() != groups.len() || groups.iter().zip(blocks).any(|(g, b)| g.len() != b.dim()) {
        return Err(Error::Shape("one block per degenerate group, sized to match".into()));
    }
    let n = rho.dim();
    let mut w = ComplexMatrix::zeros(n);
    for (g, b) in groups.iter().zip(blocks) {
        for (a, i) in g.clone().enumerate() {
            for (c, j) in g.clone().enumerate() {
                w[(i, j)] = b.matrix()[(a, c)];
            }
        }
    }
    let diag = connect_in_bases(&UnitaryMatrix::identity(n), &UnitaryMatrix::identity(n), phi)?;
    let core = &w * diag.matrix();
    UnitaryMatrix::new(&(sigma.eigenvectors().matrix() * &core) * &rho.eigenvectors().matrix().dagger())
}

/// φ_k = arg⟨s_k|O|r_k⟩.
pub fn phases_of(o: &UnitaryMatrix, rho: &DensityMatrix, sigma: &DensityMatrix) -> PhaseVector {
    let (r, s) = (rho.eigenvectors().matrix(), sigma.eigenvectors().matrix());
    let t = &(&s.dagger() * o.matrix()) * r;
    PhaseVector::new(&(0..t.dim()).map(|k| principal_arg(t[(k, k)])).collect::<Vec<_>>())
}

/// η = ΔE/‖H‖_op.
pub fn efficiency_eta(h: &HermitianOperator, rho: &DensityMatrix) -> Result<f64> {
    let op = h.op_norm();
    if !(op > 0.0) {
        return Err(domain("efficiency of the zero Hamiltonian"));
    }
    Ok((std_energy(rho, h) / op).min(1.0))
}

/// η* = √(tr[ρ²H²] − tr[(ρH)²]) / √(tr[ρ²H²] − tr[(ρH)²] + tr[ρH]²); 1 exactly when H has
/// no part commuting with ρ. A nonzero H that commutes with ρ and has zero mean gives 0.
pub fn efficiency_eta_star(h: &HermitianOperator, rho: &DensityMatrix) -> Result<f64> {
    if !(h.hs_norm() > 0.0) {
        return Err(domain("efficiency of the zero Hamiltonian"));
    }
    let c = commutator_variance(rho, h);
    let mean = rho.expect(h);
    let den = c + mean * mean;
    if den <= 0.0 {
        return Ok(0.0);
    }
    Ok((c / den).sqrt().min(1.0))
}

/// Duration of the gate e^{−iH}. Without a constraint this is τ·ΔE = ΔE (action units); with
/// ΔE ≡ ω the Hamiltonian is rescaled and the time becomes ΔE/ω.
pub fn evolution_time(h: &HermitianOperator, rho: &DensityMatrix, omega: Option<f64>) -> Result<f64> {
    let de = std_energy(rho, h);
    match omega {
        None => Ok(de),
        Some(w) if w > 0.0 && w.is_finite() => Ok(de / w),
        Some(w) => Err(domain(format!("energy scale must be positive, got {w}"))),
    }
}

/// One entry of a run history.
#[derive(Clone, Debug)]
pub struct IterRecord {
    pub h: HermitianOperator,
    /// ‖M_ρ[H]‖_HS
    pub parallel_norm: f64,
    /// ‖H‖_HS
    pub norm: f64,
    pub eta_star: f64,
    /// τ·ΔE for the gate time τ = 1.
    pub tau_delta_e: f64,
    /// ‖e^{−iH}ρe^{iH} − σ‖_HS
    pub endpoint_error: f64,
    pub phases: PhaseVector,
}

impl IterRecord {
    pub fn ratio(&self) -> f64 {
        if self.norm > 0.0 {
            self.parallel_norm / self.norm
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug)]
pub struct BrachistochroneRun {
    pub rho: DensityMatrix,
    pub sigma: DensityMatrix,
    pub variant: Variant,
    pub epsilon: f64,
    pub phi0: PhaseVector,
    pub history: Vec<IterRecord>,
    /// Number of updates applied (history has one more entry).
    pub iterations: usize,
    pub converged: bool,
}

impl BrachistochroneRun {
    pub fn last(&self) -> &IterRecord {
        self.history.last().expect("history holds the initial gate")
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.last().h
    }

    /// τ/T_QSL for the final Hamiltonian, with T_QSL = max{T_ℒ, T_Θ, T_Φ} on its own orbit.
    pub fn qsl_ratio(&self) -> Result<f64> {
        let orbit = unitary_orbit(&self.rho, self.hamiltonian(), 1.0, 2)?;
        let t = bound_unified_mixed(&self.rho, &self.sigma, &orbit)?.value;
        Ok(1.0 / t)
    }
}

fn record(o: &UnitaryMatrix, rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<(IterRecord, HermitianOperator)> {
    let h = matrix_log_unitary(o)?.h;
    let par = mask(&h, rho);
    let norm = h.hs_norm();
    let moved = rho.conjugate_by(&matrix_exp_skewh(&h, 1.0))?;
    let endpoint_error = (moved.matrix() - sigma.matrix()).hs_norm();
    let eta_star = if norm > 0.0 { efficiency_eta_star(&h, rho)? } else { 1.0 };
    let rec = IterRecord {
        parallel_norm: par.hs_norm(),
        norm,
        eta_star,
        tau_delta_e: std_energy(rho, &h),
        endpoint_error,
        phases: phases_of(o, rho, sigma),
        h,
    };
    Ok((rec, par))
}

/// Runs the iteration from O(φ0) until ‖M_ρ[H]‖ ≤ ε‖H‖ or `max_iter` updates. Hitting the cap is
/// not an error: the run comes back with `converged = false`.
pub fn solve(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    phi0: &PhaseVector,
    epsilon: f64,
    variant: Variant,
    max_iter: usize,
) -> Result<BrachistochroneRun> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(domain(format!("threshold must lie in (0, 1), got {epsilon}")));
    }
    if max_iter == 0 {
        return Err(domain("max_iter must be at least 1"));
    }
    let mut o = connect_unitary(rho, sigma, phi0)?;
    let mut history = Vec::new();
    let mut converged = false;
    loop {
        let (rec, par) = record(&o, rho, sigma)?;
        if rec.endpoint_error > EXACT_ENDPOINT_TOL {
            return Err(Error::EndpointMismatch(rec.endpoint_error));
        }
        let done = rec.parallel_norm <= epsilon * rec.norm;
        let h = rec.h.clone();
        history.push(rec);
        if done {
            converged = true;
            break;
        }
        if history.len() > max_iter {
            break;
        }
        // exp(+iA) = matrix_exp_skewh(A, −1)
        o = match variant {
            Variant::Forward => o.compose(&matrix_exp_skewh(&par, -1.0)),
            Variant::Backward => matrix_exp_skewh(&mask(&h, sigma), -1.0).compose(&o),
            Variant::TwoSided => {
                matrix_exp_skewh(&mask(&h, sigma), -0.5).compose(&o).compose(&matrix_exp_skewh(&par, -0.5))
            }
        };
    }
    Ok(BrachistochroneRun {
        rho: rho.clone(),
        sigma: sigma.clone(),
        variant,
        epsilon,
        phi0: phi0.clone(),
        iterations: history.len() - 1,
        history,
        converged,
    })
}

/// Best of several runs from different initial phases.
#[derive(Clone, Debug)]
pub struct MultiStart {
    /// Fewest iterations among converged runs; if none converged, the run with the smallest
    /// final ‖H_∥‖/‖H‖.
    pub best: BrachistochroneRun,
    /// Iteration count of each run, `None` where it did not converge.
    pub iterations: Vec<Option<usize>>,
    pub all_unconverged: bool,
}

impl MultiStart {
    pub fn from_runs(runs: Vec<BrachistochroneRun>) -> Result<Self> {
        if runs.is_empty() {
            return Err(domain("multi-start needs at least one run"));
        }
        let iterations: Vec<Option<usize>> = runs.iter().map(|r| r.converged.then_some(r.iterations)).collect();
        let all_unconverged = iterations.iter().all(Option::is_none);
        let key = |r: &BrachistochroneRun| {
            if r.converged {
                (0, r.iterations as f64)
            } else {
                (1, r.last().ratio())
            }
        };
        let mut best = 0;
        for (i, r) in runs.iter().enumerate() {
            let (a, b) = (key(r), key(&runs[best]));
            if a.0 < b.0 || (a.0 == b.0 && a.1 < b.1) {
                best = i;
            }
        }
        let best = runs.into_iter().nth(best).expect("index in range");
        Ok(Self { best, iterations, all_unconverged })
    }

    /// Histogram of converged iteration counts: entry n holds how many runs took n iterations.
    pub fn histogram(&self) -> Vec<usize> {
        let top = self.iterations.iter().flatten().copied().max().unwrap_or(0);
        let mut h = alloc::vec![0; top + 1];
        for n in self.iterations.iter().flatten() {
            h[*n] += 1;
        }
        h
    }
}

/// `l` phase vectors drawn in order from `s`.
pub fn multi_start_phases(d: usize, l: usize, s: &mut SampleStream) -> Vec<PhaseVector> {
    (0..l).map(|_| PhaseVector::random(d, s)).collect()
}

/// `l` independent runs from uniform random phases; the first run sees the first phases drawn.
pub fn multi_start(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    l: usize,
    epsilon: f64,
    variant: Variant,
    max_iter: usize,
    s: &mut SampleStream,
) -> Result<MultiStart> {
    if l == 0 {
        return Err(domain("multi-start needs at least one run"));
    }
    let runs = multi_start_phases(rho.dim(), l, s)
        .iter()
        .map(|p| solve(rho, sigma, p, epsilon, variant, max_iter))
        .collect::<Result<Vec<_>>>()?;
    MultiStart::from_runs(runs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Perturbation {
    /// ρ' = (1−δ)ρ + δχ with χ Bures-random, σ' = O ρ' O†.
    Convex,
    /// ρ' = VρV†, σ' = VσV†, V = e^{iH̃δ} with ‖H̃‖_HS = 1.
    Unitary,
}

impl FromStr for Perturbation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convex" => Ok(Perturbation::Convex),
            "unitary" => Ok(Perturbation::Unitary),
            _ => Err(domain(format!("unknown perturbation {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PerturbationOutcome {
    /// ‖H − H'‖_HS / ‖H‖_HS between the two final Hamiltonians.
    pub deviation: f64,
    pub base: BrachistochroneRun,
    pub perturbed: BrachistochroneRun,
}

/// Eigenvector phases of `m` aligned to those of `reference`, so that the connecting gates of
/// nearby problems are built from nearby bases.
fn aligned(m: &DensityMatrix, reference: &DensityMatrix) -> Result<DensityMatrix> {
    let (v, r) = (m.eigenvectors().matrix(), reference.eigenvectors().matrix());
    let n = m.dim();
    let mut out = v.clone();
    for k in 0..n {
        let c: C64 = (0..n).map(|i| r[(i, k)].conj() * v[(i, k)]).sum();
        if c.norm() > 1e-12 {
            let ph = c.conj() / c.norm();
            for i in 0..n {
                out[(i, k)] = v[(i, k)] * ph;
            }
        }
    }
    DensityMatrix::from_spectral(m.spectrum(), UnitaryMatrix::new(out)?)
}

/// Solves the problem and a perturbed copy from the same random initial phases, and reports how
/// far apart the two solutions are. δ = 0 returns the unperturbed run twice.
pub fn perturbation_study(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    delta: f64,
    kind: Perturbation,
    s: &mut SampleStream,
    epsilon: f64,
) -> Result<PerturbationOutcome> {
    if !(0.0..1.0).contains(&delta) {
        return Err(domain(format!("perturbation strength must lie in [0, 1), got {delta}")));
    }
    let d = rho.dim();
    let phi0 = PhaseVector::random(d, s);
    let base = solve(rho, sigma, &phi0, epsilon, Variant::Forward, DEFAULT_MAX_ITER)?;
    if delta == 0.0 {
        return Ok(PerturbationOutcome { deviation: 0.0, perturbed: base.clone(), base });
    }
    let (rho2, sigma2) = match kind {
        Perturbation::Convex => {
            let chi = bures_state(d, s)?;
            let mixed = DensityMatrix::new(&rho.matrix().scale_re(1.0 - delta) + &chi.matrix().scale_re(delta))?;
            let rho2 = aligned(&mixed, rho)?;
            let o = connect_unitary(rho, sigma, &PhaseVector::zeros(d))?;
            let sigma2 = rho2.conjugate_by(&o)?;
            (rho2, sigma2)
        }
        Perturbation::Unitary => {
            let h = random_hamiltonian(d, s)?;
            let h = h.scale(1.0 / h.hs_norm());
            let v = matrix_exp_skewh(&h, -delta);
            (rho.conjugate_by(&v)?, sigma.conjugate_by(&v)?)
        }
    };
    let perturbed = solve(&rho2, &sigma2, &phi0, epsilon, Variant::Forward, DEFAULT_MAX_ITER)?;
    let (h, h2) = (base.hamiltonian(), perturbed.hamiltonian());
    let deviation = (h.matrix() - h2.matrix()).hs_norm() / h.hs_norm();
    Ok(PerturbationOutcome { deviation, base, perturbed })
}
