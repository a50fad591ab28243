//! Work extraction and charging of arrays of identical cells: passive states, ergotropy,
//! multi-copy work, charging power, and upper bounds on the collective advantage.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use core::str::FromStr;

use num_traits::Float;

use crate::dynamics::{avg_energy_above_ground, avg_op_norm, avg_std_energy, Orbit};
use crate::ensembles::{haar_unitary, SampleStream};
use crate::error::{domain, shape};
use crate::matcore::{
    eig_hermitian, kron_power, matrix_exp_skewh, matrix_log_unitary, spectral_apply, ComplexMatrix, HermitianOperator,
    UnitaryMatrix,
};
use crate::metrics::fidelity;
use crate::states::{gibbs_matching_entropy, vn_entropy, DensityMatrix};
use crate::{Error, Result, C64};

/// Largest number of product levels handled by the multi-copy routines.
pub const DEFAULT_LEVEL_CAP: usize = 1_000_000;
/// Largest Hilbert-space dimension for routines that build dense many-cell operators.
pub const DENSE_CAP: usize = 4096;
/// Default γ in the interaction-order bounds (ground to fully excited state).
pub const DEFAULT_GAMMA: f64 = FRAC_PI_2;

/// N identical cells with a non-degenerate single-cell spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct BatteryModel {
    n: usize,
    levels: Vec<f64>,
}

impl BatteryModel {
    pub fn new(n: usize, levels: &[f64]) -> Result<Self> {
        if n == 0 {
            return Err(domain("battery needs at least one cell"));
        }
        if levels.len() < 2 {
            return Err(domain("cells need at least two levels"));
        }
        if levels.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("cell levels must be strictly increasing"));
        }
        Ok(Self { n, levels: levels.to_vec() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn cell_h0(&self) -> HermitianOperator {
        HermitianOperator::from_real_diag(&self.levels)
    }

    /// Diagonal of the total H₀ in the product basis, first cell most significant.
    pub fn total_levels(&self, cap: usize) -> Result<Vec<f64>> {
        product_values(&self.levels, self.n, cap, |a, b| a + b)
    }

    pub fn total_h0(&self) -> Result<HermitianOperator> {
        Ok(HermitianOperator::from_real_diag(&self.total_levels(DENSE_CAP)?))
    }
}

/// Charging protocol class, interaction order and participation number.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChargingSpec {
    pub k: usize,
    pub m: usize,
    pub constraint: Constraint,
}

impl ChargingSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > n {
            return Err(domain(format!("interaction order {} outside 1..={n}", self.k)));
        }
        if self.m == 0 || self.m > n.saturating_sub(1).max(1) {
            return Err(domain(format!("participation number {} outside 1..={}", self.m, n.saturating_sub(1).max(1))));
        }
        Ok(())
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(shape(format!("dimensions {a} and {b} differ")));
    }
    Ok(())
}

fn sorted_levels(h0: &HermitianOperator) -> Result<Vec<f64>> {
    let mut e = h0.eigenvalues()?;
    e.sort_by(|a, b| a.total_cmp(b));
    Ok(e)
}

/// Indices of `p` ordered non-increasing; ties keep their original order.
fn descending_order(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
    idx
}

/// Energy of the passive arrangement: the largest probability on the lowest level, and so on.
pub fn passive_energy(probs: &[f64], levels: &[f64]) -> f64 {
    assert_eq!(probs.len(), levels.len());
    let mut p = probs.to_vec();
    p.sort_by(|a, b| b.total_cmp(a));
    let mut e = levels.to_vec();
    e.sort_by(|a, b| a.total_cmp(b));
    p.iter().zip(&e).map(|(x, y)| x * y).sum()
}

/// Passive state ς = VρV† of ρ with respect to H₀, and the unitary V.
pub fn passive_state(rho: &DensityMatrix, h0: &HermitianOperator) -> Result<(DensityMatrix, UnitaryMatrix)> {
    check_dims(rho.dim(), h0.dim())?;
    let d = rho.dim();
    let (_, w) = eig_hermitian(h0)?;
    let p = rho.spectrum();
    let r = rho.eigenvectors().matrix();
    let w = w.matrix();
    let order = descending_order(p);
    let v = ComplexMatrix::from_fn(d, |i, j| (0..d).map(|k| w[(i, k)] * r[(j, order[k])].conj()).sum());
    let vals: Vec<f64> = order.iter().map(|&k| p[k]).collect();
    let sigma = DensityMatrix::new(spectral_apply(&vals, w, |x| C64::new(x, 0.0)))?;
    Ok((sigma, UnitaryMatrix::new(v)?))
}

/// W_max = tr[ρH₀] − tr[ςH₀].
pub fn ergotropy(rho: &DensityMatrix, h0: &HermitianOperator) -> Result<f64> {
    check_dims(rho.dim(), h0.dim())?;
    let e = sorted_levels(h0)?;
    Ok((rho.expect(h0) - passive_energy(rho.spectrum(), &e)).max(0.0))
}

/// Lowest energy among states with von Neumann entropy `s`.
fn entropy_matched_energy(h0: &HermitianOperator, s: f64) -> Result<f64> {
    let e = sorted_levels(h0)?;
    let d = e.len();
    let g = e.iter().filter(|&&x| x - e[0] <= 1e-12 * (1.0 + e[0].abs())).count();
    if s <= (g as f64).ln() + 1e-12 {
        return Ok(e[0]);
    }
    if s >= (d as f64).ln() - 1e-12 {
        return Ok(e.iter().sum::<f64>() / d as f64);
    }
    let (gibbs, _) = gibbs_matching_entropy(h0, s)?;
    Ok(gibbs.expect(h0))
}

/// tr[ρH₀] − tr[𝒢_β̄H₀], with 𝒢_β̄ the Gibbs state of equal entropy (β̄ ≥ 0). This bounds the
/// ergotropy of ρ from above and is the per-copy work available as the number of copies grows.
pub fn ergotropy_gibbs_bound(rho: &DensityMatrix, h0: &HermitianOperator) -> Result<f64> {
    check_dims(rho.dim(), h0.dim())?;
    Ok(rho.expect(h0) - entropy_matched_energy(h0, vn_entropy(rho))?)
}

/// Values `combine`d over all n-tuples of `v`, in product order with the first factor most
/// significant.
pub fn product_values(v: &[f64], n: usize, cap: usize, combine: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    let d = v.len();
    let needed = d.checked_pow(n as u32).unwrap_or(usize::MAX);
    if needed > cap {
        return Err(Error::Resource { needed, cap });
    }
    let mut acc = vec![0.0];
    let mut first = true;
    for _ in 0..n {
        let mut next = Vec::with_capacity(acc.len() * d);
        for &a in &acc {
            for &x in v {
                next.push(if first { x } else { combine(a, x) });
            }
        }
        acc = next;
        first = false;
    }
    Ok(acc)
}

/// Ergotropy of ⊗^N ρ per copy, with the default cap on d^N.
pub fn wmax_per_copy(rho: &DensityMatrix, h0: &HermitianOperator, n: usize) -> Result<f64> {
    wmax_per_copy_capped(rho, h0, n, DEFAULT_LEVEL_CAP)
}

/// (1/N)·tr[(⊗^Nρ − p(⊗^Nρ))H₀], from the product spectrum sorted against summed levels.
pub fn wmax_per_copy_capped(rho: &DensityMatrix, h0: &HermitianOperator, n: usize, cap: usize) -> Result<f64> {
    check_dims(rho.dim(), h0.dim())?;
    if n == 0 {
        return Err(domain("need at least one copy"));
    }
    let e = sorted_levels(h0)?;
    let probs = product_values(rho.spectrum(), n, cap, |a, b| a * b)?;
    let levels = product_values(&e, n, cap, |a, b| a + b)?;
    let nf = n as f64;
    Ok(((nf * rho.expect(h0) - passive_energy(&probs, &levels)) / nf).max(0.0))
}

/// Smallest N ≤ `n_max` for which ⊗^N ς is not passive, or `None`.
pub fn completely_passive_check(sigma: &DensityMatrix, h0: &HermitianOperator, n_max: usize) -> Result<Option<usize>> {
    completely_passive_check_capped(sigma, h0, n_max, DEFAULT_LEVEL_CAP)
}

pub fn completely_passive_check_capped(
    sigma: &DensityMatrix,
    h0: &HermitianOperator,
    n_max: usize,
    cap: usize,
) -> Result<Option<usize>> {
    check_dims(sigma.dim(), h0.dim())?;
    let e = sorted_levels(h0)?;
    let scale = e.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    for n in 1..=n_max {
        let w = wmax_per_copy_capped(sigma, h0, n, cap)?;
        if w > 1e-10 * scale {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// Transposition of the contents of two product basis states that differ in one cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hop {
    pub a: usize,
    pub b: usize,
    pub cell: usize,
}

/// Sequence of single-cell hops that sorts ⊗^N ρ into its passive state.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionSchedule {
    pub d: usize,
    pub n: usize,
    /// (source, target) product indices of each transposition, in order.
    pub transpositions: Vec<(usize, usize)>,
    pub hops: Vec<Hop>,
}

impl ExtractionSchedule {
    /// Cell indices of a product basis index, first cell first.
    pub fn digits(&self, mut a: usize) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for c in (0..self.n).rev() {
            out[c] = a % self.d;
            a /= self.d;
        }
        out
    }

    /// Applies every hop to a vector of populations.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        let mut v = values.to_vec();
        for h in &self.hops {
            v.swap(h.a, h.b);
        }
        v
    }

    /// `perm[a]` is the original index whose population ends up at `a`.
    pub fn permutation(&self) -> Vec<usize> {
        let mut p: Vec<usize> = (0..self.d.pow(self.n as u32)).collect();
        for h in &self.hops {
            p.swap(h.a, h.b);
        }
        p
    }
}

/// Schedule for the diagonal state ⊗^N diag(p) under levels `levels` (aligned with `p`).
/// Each out-of-place population is moved by one transposition, which is carried out as hops
/// that change the first differing cell, then the next, and back again: 2m − 1 hops when
/// source and target differ in m cells.
pub fn separable_extraction_schedule(p: &[f64], levels: &[f64], n: usize) -> Result<ExtractionSchedule> {
    if p.len() != levels.len() {
        return Err(shape(format!("{} populations for {} levels", p.len(), levels.len())));
    }
    if n == 0 {
        return Err(domain("need at least one copy"));
    }
    let d = p.len();
    let q = product_values(p, n, DEFAULT_LEVEL_CAP, |a, b| a * b)?;
    let e = product_values(levels, n, DEFAULT_LEVEL_CAP, |a, b| a + b)?;
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| e[a].total_cmp(&e[b]));
    let tol = 1e-12 * q.iter().fold(0.0f64, |m, &x| m.max(x));
    let mut sched = ExtractionSchedule { d, n, transpositions: Vec::new(), hops: Vec::new() };
    let mut cur = q;
    for j in 0..order.len() {
        let target = order[j];
        let mut src = target;
        for &c in &order[j..] {
            if cur[c] > cur[src] {
                src = c;
            }
        }
        if cur[src] <= cur[target] + tol {
            continue;
        }
        let a = sched.digits(src);
        let b = sched.digits(target);
        let mut path = vec![(src, usize::MAX)];
        let mut node = a.clone();
        for c in 0..n {
            if node[c] != b[c] {
                node[c] = b[c];
                path.push((node.iter().fold(0, |acc, &x| acc * d + x), c));
            }
        }
        let m = path.len() - 1;
        let mut hops = Vec::with_capacity(2 * m - 1);
        for i in 0..m {
            hops.push(Hop { a: path[i].0, b: path[i + 1].0, cell: path[i + 1].1 });
        }
        for i in (0..m - 1).rev() {
            hops.push(Hop { a: path[i].0, b: path[i + 1].0, cell: path[i + 1].1 });
        }
        for h in &hops {
            cur.swap(h.a, h.b);
        }
        sched.transpositions.push((src, target));
        sched.hops.extend(hops);
    }
    Ok(sched)
}

/// E_initial − E_final, the work taken out of the system.
pub fn work_extracted(initial: &DensityMatrix, fin: &DensityMatrix, h0: &HermitianOperator) -> f64 {
    initial.expect(h0) - fin.expect(h0)
}

/// E_final − E_initial, the work deposited by a charging protocol.
pub fn work_deposited(initial: &DensityMatrix, fin: &DensityMatrix, h0: &HermitianOperator) -> f64 {
    -work_extracted(initial, fin, h0)
}

/// Deposited work and instantaneous power along a unitary orbit.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerTrace {
    pub times: Vec<f64>,
    /// W(t) = tr[ρ(t)H₀] − tr[ρ(0)H₀].
    pub deposited: Vec<f64>,
    /// P(t) = dW/dt = −i tr([H(t), ρ(t)]H₀).
    pub power: Vec<f64>,
}

impl PowerTrace {
    /// Work series in the extraction sign convention.
    pub fn extracted(&self) -> Vec<f64> {
        self.deposited.iter().map(|w| -w).collect()
    }
}

pub fn power_trace(orbit: &Orbit, h0: &HermitianOperator) -> Result<PowerTrace> {
    if !orbit.is_unitary() {
        return Err(domain("power trace needs a Hamiltonian generator"));
    }
    check_dims(orbit.initial().dim(), h0.dim())?;
    let e0 = orbit.initial().expect(h0);
    let last = orbit.len().saturating_sub(2);
    let mut deposited = Vec::with_capacity(orbit.len());
    let mut power = Vec::with_capacity(orbit.len());
    for (k, rho) in orbit.states().iter().enumerate() {
        let h = orbit.hamiltonian_on(k.min(last)).ok_or_else(|| domain("orbit without Hamiltonian"))?;
        deposited.push(rho.expect(h0) - e0);
        let c = h.matrix().commutator(rho.matrix());
        power.push(c.trace_product(h0.matrix()).im);
    }
    Ok(PowerTrace { times: orbit.times().to_vec(), deposited, power })
}

/// Charging times and advantage of the ladder example under ‖H‖_op = E_max.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderAdvantage {
    pub tau_parallel: f64,
    pub tau_collective: f64,
    pub gamma: f64,
}

/// Parallel driving α_∥ Σ_l (|1⟩⟨d| + h.c.) against collective α_♯(|E⟩⟨G| + h.c.). The local
/// terms commute and each has unit norm, so ‖H_∥‖ = Nα_∥ and α_∥ = E_max/N.
pub fn advantage_ladder(n: usize, e_max: f64) -> Result<LadderAdvantage> {
    if n == 0 {
        return Err(domain("need at least one cell"));
    }
    if !(e_max > 0.0 && e_max.is_finite()) {
        return Err(domain(format!("E_max = {e_max} must be positive")));
    }
    let tau_collective = FRAC_PI_2 / e_max;
    Ok(LadderAdvantage { tau_parallel: n as f64 * tau_collective, tau_collective, gamma: n as f64 })
}

fn flip_op(d: usize) -> ComplexMatrix {
    let mut x = ComplexMatrix::zeros(d);
    x[(0, d - 1)] = C64::new(1.0, 0.0);
    x[(d - 1, 0)] = C64::new(1.0, 0.0);
    x
}

fn dense_dim(d: usize, n: usize) -> Result<usize> {
    let needed = d.checked_pow(n as u32).unwrap_or(usize::MAX);
    if needed > DENSE_CAP {
        return Err(Error::Resource { needed, cap: DENSE_CAP });
    }
    Ok(needed)
}

/// (H_∥, H_♯) of the ladder example for N cells of dimension d, both of norm E_max.
pub fn ladder_hamiltonians(n: usize, d: usize, e_max: f64) -> Result<(HermitianOperator, HermitianOperator)> {
    if d < 2 || n == 0 {
        return Err(domain("ladder needs n >= 1 cells of dimension >= 2"));
    }
    let dim = dense_dim(d, n)?;
    let x = flip_op(d);
    let mut par = ComplexMatrix::zeros(dim);
    for l in 0..n {
        par = &par + &embed_local(&x, &[l], n, d);
    }
    let par = HermitianOperator::hermitize(&par.scale_re(e_max / n as f64));
    let mut col = ComplexMatrix::zeros(dim);
    col[(0, dim - 1)] = C64::new(e_max, 0.0);
    col[(dim - 1, 0)] = C64::new(e_max, 0.0);
    Ok((par, HermitianOperator::hermitize(&col)))
}

/// 1 − |⟨E|ψ(τ)⟩|² for the parallel and collective ladder orbits started in |G⟩ and run for
/// their respective charging times.
pub fn ladder_infidelities(n: usize, d: usize, e_max: f64) -> Result<(f64, f64)> {
    let adv = advantage_ladder(n, e_max)?;
    let (par, col) = ladder_hamiltonians(n, d, e_max)?;
    let dim = par.dim();
    let run = |h: &HermitianOperator, tau: f64| {
        let u = matrix_exp_skewh(h, tau);
        let mut g = vec![C64::new(0.0, 0.0); dim];
        g[0] = C64::new(1.0, 0.0);
        let psi = u.matrix().mul_vec(&g);
        (1.0 - psi[dim - 1].norm_sqr()).max(0.0)
    };
    Ok((run(&par, adv.tau_parallel), run(&col, adv.tau_collective)))
}

/// Advantage of α_♯(|0⟩⟨1| + h.c.)^{⊗N} acting on ⊗^N 𝒢_β, under the two extensive constraints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparableBall {
    pub gamma_c1: f64,
    pub gamma_c2: f64,
}

/// Both drives are static, so ΔE and E − E_g are constants of motion. On states diagonal in the
/// energy basis ⟨X⟩ = 0 and ⟨X²⟩ = 1 for X and for X^{⊗N} alike; a single cell then has
/// ΔE = E − E_g = 1 and the collective drive has ΔE_♯ = E_♯ − E_g = α_♯, whatever β is.
pub fn advantage_separable_ball(n: usize, beta: f64) -> Result<SeparableBall> {
    if n == 0 {
        return Err(domain("need at least one cell"));
    }
    crate::matcore::check_finite_real(beta, "beta")?;
    let (single_std, single_energy) = (1.0, 1.0);
    let (unit_std, unit_energy) = (1.0, 1.0);
    let nf = n as f64;
    Ok(SeparableBall {
        gamma_c1: nf.sqrt() * single_std / unit_std,
        gamma_c2: nf * single_energy / unit_energy,
    })
}

/// Simulated counterpart of [`advantage_separable_ball`]: constraint quantities are averaged
/// along the actual orbits, and the collective orbit is checked to end in ⊗^N 𝒢_{−β}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparableBallSimulation {
    pub gamma_c1: f64,
    pub gamma_c2: f64,
    /// Largest HS distance from ⊗^N 𝒢_{−β} at τ_♯ over the two constraints.
    pub endpoint_error: f64,
}

pub fn separable_ball_simulation(n: usize, beta: f64, grid: usize) -> Result<SeparableBallSimulation> {
    use crate::dynamics::unitary_orbit;
    use crate::states::gibbs_state;
    let dim = dense_dim(2, n)?;
    let h0 = HermitianOperator::from_real_diag(&[0.0, 1.0]);
    let x = HermitianOperator::hermitize(&flip_op(2));
    let g = gibbs_state(&h0, beta)?;
    let g_neg = gibbs_state(&h0, -beta)?;
    let tau_par = FRAC_PI_2;
    let single = unitary_orbit(&g, &x, tau_par, grid)?;
    let (s_std, s_en) = (avg_std_energy(&single)?, avg_energy_above_ground(&single)?);
    let start = g.tensor_power(n)?;
    let target = g_neg.tensor_power(n)?;
    let xn = HermitianOperator::hermitize(&kron_power(x.matrix(), n));
    debug_assert_eq!(xn.dim(), dim);
    let unit = unitary_orbit(&start, &xn, tau_par, grid)?;
    let (u_std, u_en) = (avg_std_energy(&unit)?, avg_energy_above_ground(&unit)?);
    let nf = n as f64;
    let alphas = [nf.sqrt() * s_std / u_std, nf * s_en / u_en];
    let mut err = 0.0f64;
    for &a in &alphas {
        let orbit = unitary_orbit(&start, &xn.scale(a), tau_par / a, 2)?;
        err = err.max((orbit.last().matrix() - target.matrix()).hs_norm());
    }
    Ok(SeparableBallSimulation { gamma_c1: alphas[0], gamma_c2: alphas[1], endpoint_error: err })
}

/// Extensive energetic constraint on the collective charging Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// Time-averaged operator norm at most N times that of one cell.
    C0,
    /// Time-averaged energy spread at most √N times that of one cell.
    C1,
    /// Time-averaged energy above ground at most N times that of one cell.
    C2,
    /// Equal operator norm for collective and parallel drives.
    OpNorm,
}

impl Constraint {
    pub const ALL: [Constraint; 4] = [Constraint::C0, Constraint::C1, Constraint::C2, Constraint::OpNorm];

    pub fn name(self) -> &'static str {
        match self {
            Constraint::C0 => "c0",
            Constraint::C1 => "c1",
            Constraint::C2 => "c2",
            Constraint::OpNorm => "opnorm",
        }
    }
}

impl FromStr for Constraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Constraint::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| domain(format!("unknown constraint '{s}'")))
    }
}

/// Inputs to [`advantage_upper_bound`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdvantageParams {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    /// τ_∥/T_QSL of the parallel protocol, ≥ 1.
    pub s_factor: f64,
    pub gamma: f64,
    /// ℒ(ρ, σ)/ℒ(⊗^Nρ, ⊗^Nσ); see [`bures_ratio`].
    pub bures_ratio: f64,
}

impl AdvantageParams {
    pub fn new(n: usize, k: usize, m: usize) -> Self {
        Self { n, k, m, s_factor: 1.0, gamma: DEFAULT_GAMMA, bures_ratio: 1.0 }
    }
}

/// Upper bound on Γ. C1: s√N·ℒ-ratio; C2: sN·ℒ-ratio; C0: γk·M with M = k(m − 1) + 1 layers
/// (m = 1 is the plain circuit). The uniform norm constraint is treated as C0 with a single
/// N-body term, giving γN.
pub fn advantage_upper_bound(c: Constraint, p: &AdvantageParams) -> Result<f64> {
    if p.n == 0 || p.k == 0 || p.k > p.n || p.m == 0 {
        return Err(domain(format!("need 1 <= k <= N and m >= 1, got N={} k={} m={}", p.n, p.k, p.m)));
    }
    if !(p.s_factor >= 1.0 && p.gamma > 0.0 && p.bures_ratio > 0.0) {
        return Err(domain("s >= 1, gamma > 0 and a positive Bures ratio are required"));
    }
    let nf = p.n as f64;
    Ok(match c {
        Constraint::C1 => p.s_factor * nf.sqrt() * p.bures_ratio,
        Constraint::C2 => p.s_factor * nf * p.bures_ratio,
        Constraint::C0 => p.gamma * (p.k * trotter_overhead_bound(p.k, p.m)) as f64,
        Constraint::OpNorm => p.gamma * nf,
    })
}

/// ℒ(⊗^Nρ, ⊗^Nσ) = arccos(F(ρ, σ)^N).
pub fn tensor_bures_angle(rho: &DensityMatrix, sigma: &DensityMatrix, n: usize) -> Result<f64> {
    Ok(fidelity(rho, sigma)?.powi(n as i32).acos())
}

pub fn bures_ratio(rho: &DensityMatrix, sigma: &DensityMatrix, n: usize) -> Result<f64> {
    let l1 = tensor_bures_angle(rho, sigma, 1)?;
    let ln = tensor_bures_angle(rho, sigma, n)?;
    if ln <= 0.0 {
        return Err(domain("states coincide; the Bures ratio is undefined"));
    }
    Ok(l1 / ln)
}

/// M ≤ k(m − 1) + 1.
pub fn trotter_overhead_bound(k: usize, m: usize) -> usize {
    k * m.saturating_sub(1) + 1
}

/// Largest pairwise-intersecting family of k-sets in which no element lies in more than m sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverheadSearch {
    pub best: usize,
    pub family: Vec<Vec<usize>>,
    /// False when the node budget ran out before the search space was exhausted.
    pub exhaustive: bool,
    pub nodes: u64,
}

struct Search {
    k: usize,
    m: usize,
    cap: usize,
    budget: u64,
    nodes: u64,
    best: Vec<u64>,
    family: Vec<u64>,
    degree: Vec<usize>,
    used: usize,
}

impl Search {
    fn spare(&self, set: u64) -> usize {
        (0..64).filter(|&x| set >> x & 1 == 1).map(|x| self.m - self.degree[x]).sum()
    }

    fn push(&mut self, set: u64) {
        for x in 0..64 {
            if set >> x & 1 == 1 {
                self.degree[x] += 1;
            }
        }
        self.family.push(set);
    }

    fn pop(&mut self) {
        let set = self.family.pop().expect("nonempty family");
        for x in 0..64 {
            if set >> x & 1 == 1 {
                self.degree[x] -= 1;
            }
        }
    }

    // returns false once the budget is spent or the bound is reached
    fn dfs(&mut self) -> bool {
        self.nodes += 1;
        if self.family.len() > self.best.len() {
            self.best = self.family.clone();
            if self.best.len() == self.cap {
                return false;
            }
        }
        if self.nodes >= self.budget {
            return false;
        }
        let room = self.family.iter().map(|&s| self.spare(s)).min().unwrap_or(0);
        if self.family.len() + room <= self.best.len() {
            return true;
        }
        let last = *self.family.last().expect("search starts from one set");
        let free: Vec<usize> = (0..self.used).filter(|&x| self.degree[x] < self.m).collect();
        for fresh in 0..self.k {
            if self.used + fresh > 64 {
                break;
            }
            let fresh_mask: u64 = (self.used..self.used + fresh).fold(0, |a, x| a | 1 << x);
            let mut ok = true;
            for_each_subset(&free, self.k - fresh, &mut |sub| {
                let set = sub | fresh_mask;
                if set <= last || !self.family.iter().all(|&s| s & set != 0) {
                    return true;
                }
                let saved = self.used;
                self.used += fresh;
                self.push(set);
                ok = self.dfs();
                self.pop();
                self.used = saved;
                ok
            });
            if !ok {
                return false;
            }
        }
        true
    }
}

// calls f on every r-subset of `items` as a bitmask; stops when f returns false
fn for_each_subset(items: &[usize], r: usize, f: &mut dyn FnMut(u64) -> bool) -> bool {
    fn rec(items: &[usize], r: usize, start: usize, acc: u64, f: &mut dyn FnMut(u64) -> bool) -> bool {
        if r == 0 {
            return f(acc);
        }
        for i in start..items.len() {
            if items.len() - i < r {
                break;
            }
            if !rec(items, r - 1, i + 1, acc | 1 << items[i], f) {
                return false;
            }
        }
        true
    }
    rec(items, r, 0, 0, f)
}

/// Exact branch-and-bound search for the Trotter layer count M(k, m). Sets are generated in
/// increasing bitmask order and each new set only introduces the next unused labels, which
/// loses no family up to relabeling.
pub fn trotter_overhead_search(k: usize, m: usize, node_budget: u64) -> Result<OverheadSearch> {
    if k == 0 || m == 0 {
        return Err(domain("k and m must be positive"));
    }
    let cap = trotter_overhead_bound(k, m);
    if k * cap > 64 {
        return Err(domain(format!("k = {k}, m = {m} exceeds the 64-element search space")));
    }
    let first: u64 = (1u64 << k) - 1;
    let mut s = Search {
        k,
        m,
        cap,
        budget: node_budget.max(1),
        nodes: 0,
        best: Vec::new(),
        family: Vec::new(),
        degree: vec![0; 64],
        used: k,
    };
    s.push(first);
    let finished = s.dfs();
    let exhaustive = finished || s.best.len() == cap;
    let family = s.best.iter().map(|&set| (0..64).filter(|&x| set >> x & 1 == 1).collect()).collect();
    Ok(OverheadSearch { best: s.best.len(), family, exhaustive, nodes: s.nodes })
}

/// Π_l Π_j exp(−i H_j(lτ/L) τ/L) for l = 1..L, later factors to the left.
pub fn trotter_unitary(
    layer: impl Fn(usize, f64) -> HermitianOperator,
    layers: usize,
    tau: f64,
    steps: usize,
) -> Result<UnitaryMatrix> {
    if steps == 0 || layers == 0 {
        return Err(domain("need at least one step and one layer"));
    }
    let dt = tau / steps as f64;
    let mut u: Option<UnitaryMatrix> = None;
    for l in 1..=steps {
        let t = l as f64 * dt;
        for j in 0..layers {
            let f = matrix_exp_skewh(&layer(j, t), dt);
            u = Some(match u {
                None => f,
                Some(acc) => f.compose(&acc),
            });
        }
    }
    Ok(u.expect("at least one factor"))
}

/// Time-ordered exponential of H(t) over [0, τ] by the midpoint product rule.
pub fn time_ordered_unitary(h: impl Fn(f64) -> HermitianOperator, tau: f64, steps: usize) -> Result<UnitaryMatrix> {
    if steps == 0 {
        return Err(domain("need at least one step"));
    }
    let dt = tau / steps as f64;
    let mut u = matrix_exp_skewh(&h(0.5 * dt), dt);
    for l in 1..steps {
        u = matrix_exp_skewh(&h((l as f64 + 0.5) * dt), dt).compose(&u);
    }
    Ok(u)
}

/// Places an operator on the cells `sites` of an n-cell register of d-level cells.
pub fn embed_local(op: &ComplexMatrix, sites: &[usize], n: usize, d: usize) -> ComplexMatrix {
    let k = sites.len();
    assert_eq!(op.dim(), d.pow(k as u32), "operator dimension does not match the sites");
    assert!(sites.iter().all(|&s| s < n), "site index out of range");
    let dim = d.pow(n as u32);
    let stride: Vec<usize> = sites.iter().map(|&s| d.pow((n - 1 - s) as u32)).collect();
    let local_of = |i: usize| stride.iter().fold(0, |acc, &st| acc * d + (i / st) % d);
    let mut out = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        let a = local_of(i);
        let base = i - stride.iter().map(|&st| ((i / st) % d) * st).sum::<usize>();
        for b in 0..op.dim() {
            let mut j = base;
            let mut rest = b;
            for &st in stride.iter().rev() {
                j += (rest % d) * st;
                rest /= d;
            }
            out[(i, j)] = op[(a, b)];
        }
    }
    out
}

/// A k-body term h_μ on the qubits `sites`.
#[derive(Clone, Debug)]
pub struct LocalTerm {
    pub sites: Vec<usize>,
    pub h: HermitianOperator,
}

/// P = ‖Σ α_μ Y_μ⊗𝟙‖/‖Σ α_μ X_μ⊗𝟙‖ for qubit cells with H₀ = diag(−1, 1) per cell, where
/// X_μ = h_μ/‖h_μ‖, ι_μ = (1/k) Σ_{i∈μ} H₀^(i) and Y_μ = ½[X_μ, ι_μ].
pub fn conjecture_ratio(terms: &[LocalTerm], n: usize) -> Result<f64> {
    let dim = dense_dim(2, n)?;
    let mut sx = ComplexMatrix::zeros(dim);
    let mut sy = ComplexMatrix::zeros(dim);
    for t in terms {
        let k = t.sites.len();
        if k == 0 || t.h.dim() != 1 << k || t.sites.iter().any(|&s| s >= n) {
            return Err(shape("term does not fit its sites"));
        }
        let alpha = t.h.op_norm();
        if alpha == 0.0 {
            continue;
        }
        let x = t.h.matrix().scale_re(1.0 / alpha);
        let iota: Vec<f64> = (0..1usize << k)
            .map(|a| (0..k).map(|i| if a >> (k - 1 - i) & 1 == 1 { 1.0 } else { -1.0 }).sum::<f64>() / k as f64)
            .collect();
        let y = x.commutator(&ComplexMatrix::from_real_diag(&iota)).scale_re(0.5);
        sx = &sx + &embed_local(&x.scale_re(alpha), &t.sites, n, 2);
        sy = &sy + &embed_local(&y.scale_re(alpha), &t.sites, n, 2);
    }
    let den = sx.op_norm();
    if den == 0.0 {
        return Err(domain("all terms vanish"));
    }
    Ok(sy.op_norm() / den)
}

/// All k-subsets of 0..n in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(n, k, 0, &mut cur, &mut out);
    out
}

/// One sample of P with every k-subset carrying h_μ = i log u_μ, u_μ Haar on 2^k levels.
pub fn conjecture_sample(n: usize, k: usize, s: &mut SampleStream) -> Result<f64> {
    if k == 0 || k > n {
        return Err(domain(format!("interaction order {k} outside 1..={n}")));
    }
    dense_dim(2, n)?;
    let mut terms = Vec::new();
    for sites in k_subsets(n, k) {
        let u = haar_unitary(1 << k, s);
        terms.push(LocalTerm { sites, h: matrix_log_unitary(&u)?.h });
    }
    conjecture_ratio(&terms, n)
}

/// Result of [`conjecture_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConjectureReport {
    pub n: usize,
    pub k: usize,
    pub values: Vec<f64>,
    pub max_p: f64,
    /// (sample index, P) for every P ≥ 1.
    pub violations: Vec<(u64, f64)>,
}

impl ConjectureReport {
    pub fn from_values(n: usize, k: usize, values: Vec<f64>) -> Self {
        let max_p = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let violations =
            values.iter().enumerate().filter(|(_, &p)| p >= 1.0).map(|(i, &p)| (i as u64, p)).collect();
        Self { n, k, values, max_p, violations }
    }
}

/// Sample i is drawn from `s.at(i)`.
pub fn conjecture_check(n: usize, k: usize, samples: usize, s: &SampleStream) -> Result<ConjectureReport> {
    let values = (0..samples as u64).map(|i| conjecture_sample(n, k, &mut s.at(i))).collect::<Result<Vec<_>>>()?;
    Ok(ConjectureReport::from_values(n, k, values))
}

/// Time-averaged energy spread, energy above ground and operator norm of a charging orbit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChargingMetrics {
    pub avg_std_energy: f64,
    pub avg_energy: f64,
    pub avg_op_norm: f64,
}

impl ChargingMetrics {
    pub fn of(orbit: &Orbit) -> Result<Self> {
        Ok(Self {
            avg_std_energy: avg_std_energy(orbit)?,
            avg_energy: avg_energy_above_ground(orbit)?,
            avg_op_norm: avg_op_norm(orbit)?,
        })
    }

    /// ΔĒ ≤ ℰ̄ and Ē ≤ 2ℰ̄, up to `tol`.
    pub fn chain_holds(&self, tol: f64) -> bool {
        self.avg_std_energy <= self.avg_op_norm + tol && self.avg_energy <= 2.0 * self.avg_op_norm + tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{piecewise_orbit, unitary_orbit};
    use crate::matcore::{kron, kron_all};
    use crate::states::gibbs_state;
    use crate::test_util::{rand_hermitian, rand_matrix, rand_unitary, Lcg};
    use proptest::prelude::*;

    fn mixed(g: &mut Lcg, d: usize) -> DensityMatrix {
        let a = rand_matrix(g, d);
        DensityMatrix::normalized(&a * &a.dagger()).unwrap()
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        // Heap's algorithm
        let mut p: Vec<usize> = (0..n).collect();
        let mut c = vec![0; n];
        let mut out = vec![p.clone()];
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    p.swap(0, i);
                } else {
                    p.swap(c[i], i);
                }
                out.push(p.clone());
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        out
    }

    fn three_level_state() -> DensityMatrix {
        let p = [0.538, 0.237, 0.224];
        let s: f64 = p.iter().sum();
        DensityMatrix::from_diag(&[p[0] / s, p[1] / s, p[2] / s]).unwrap()
    }

    fn three_level_h0() -> HermitianOperator {
        HermitianOperator::from_real_diag(&[0.0, 0.579, 1.0])
    }

    #[test]
    fn five_level_ergotropy() {
        let lz = 1.3;
        let h0 = HermitianOperator::from_real_diag(&[-2.0 * lz, -lz, 0.0, lz, 2.0 * lz]);
        let rho = DensityMatrix::from_diag(&[0.1, 0.2, 0.0, 0.3, 0.4]).unwrap();
        let (sigma, v) = passive_state(&rho, &h0).unwrap();
        let diag: Vec<f64> = sigma.matrix().diagonal().iter().map(|z| z.re).collect();
        for (x, y) in diag.iter().zip([0.4, 0.3, 0.2, 0.1, 0.0]) {
            assert!((x - y).abs() < 1e-14);
        }
        let moved = rho.conjugate_by(&v).unwrap();
        assert!((moved.matrix() - sigma.matrix()).max_abs() < 1e-14);
        // 0.7 L_z before, −1.0 L_z after
        assert!((ergotropy(&rho, &h0).unwrap() - 1.7 * lz).abs() < 1e-12);
    }

    #[test]
    fn passive_input_is_fixed() {
        let h0 = HermitianOperator::from_real_diag(&[0.0, 1.0, 2.5]);
        let rho = DensityMatrix::from_diag(&[0.5, 0.3, 0.2]).unwrap();
        let (sigma, _) = passive_state(&rho, &h0).unwrap();
        assert!((sigma.matrix() - rho.matrix()).max_abs() < 1e-14);
        assert_eq!(ergotropy(&rho, &h0).unwrap(), 0.0);
    }

    #[test]
    fn passive_energy_beats_all_permutations() {
        let mut g = Lcg::new(5);
        let perms = permutations(6);
        assert_eq!(perms.len(), 720);
        for _ in 0..20 {
            let rho = mixed(&mut g, 6);
            let h0 = rand_hermitian(&mut g, 6);
            let e = sorted_levels(&h0).unwrap();
            let p = rho.spectrum();
            let best = perms
                .iter()
                .map(|pi| (0..6).map(|k| p[pi[k]] * e[k]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let (sigma, _) = passive_state(&rho, &h0).unwrap();
            assert_eq!(passive_energy(p, &e), best);
            assert!((sigma.expect(&h0) - best).abs() < 1e-12);
        }
    }

    #[test]
    fn thermal_states_have_no_ergotropy() {
        let mut g = Lcg::new(9);
        for &beta in &[0.1, 1.0, 4.0] {
            let h0 = rand_hermitian(&mut g, 4);
            let gibbs = gibbs_state(&h0, beta).unwrap();
            assert!(ergotropy(&gibbs, &h0).unwrap() < 1e-10);
        }
    }

    #[test]
    fn gibbs_bound_dominates_ergotropy() {
        let mut g = Lcg::new(10);
        for d in 2..6 {
            let rho = mixed(&mut g, d);
            let h0 = rand_hermitian(&mut g, d);
            assert!(ergotropy(&rho, &h0).unwrap() <= ergotropy_gibbs_bound(&rho, &h0).unwrap() + 1e-12);
        }
        // pure states: the bound is the gap to the ground level
        let h0 = HermitianOperator::from_real_diag(&[0.0, 1.0, 3.0]);
        let top = DensityMatrix::from_diag(&[0.0, 0.0, 1.0]).unwrap();
        assert!((ergotropy_gibbs_bound(&top, &h0).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn wmax_matches_explicit_three_copy_sort() {
        let rho = three_level_state();
        let h0 = three_level_h0();
        let p = rho.spectrum().to_vec();
        let e = [0.0, 0.579, 1.0];
        let mut probs: Vec<f64> = Vec::new();
        let mut levels: Vec<f64> = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    probs.push(p[a] * p[b] * p[c]);
                    levels.push(e[a] + e[b] + e[c]);
                }
            }
        }
        probs.sort_by(|x, y| y.total_cmp(x));
        levels.sort_by(|x, y| x.total_cmp(y));
        let passive: f64 = probs.iter().zip(&levels).map(|(x, y)| x * y).sum();
        let oracle = (3.0 * rho.expect(&h0) - passive) / 3.0;
        let w = wmax_per_copy(&rho, &h0, 3).unwrap();
        assert!(w > 1e-4);
        assert!((w - oracle).abs() < 1e-15);
        assert_eq!(wmax_per_copy(&rho, &h0, 1).unwrap(), 0.0);
    }

    #[test]
    fn wmax_grows_toward_gibbs_limit() {
        let rho = three_level_state();
        let h0 = three_level_h0();
        let limit = ergotropy_gibbs_bound(&rho, &h0).unwrap();
        let w: Vec<f64> = (1..=8).map(|n| wmax_per_copy(&rho, &h0, n).unwrap()).collect();
        assert!(w.windows(2).all(|p| p[1] >= p[0]));
        assert!(w.iter().all(|&x| (0.0..=limit).contains(&x)));
    }

    #[test]
    fn level_cap_is_enforced() {
        let rho = three_level_state();
        match wmax_per_copy_capped(&rho, &three_level_h0(), 5, 100) {
            Err(Error::Resource { needed: 243, cap: 100 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn complete_passivity() {
        let h0 = three_level_h0();
        assert_eq!(completely_passive_check(&three_level_state(), &h0, 5).unwrap(), Some(3));
        let ground = DensityMatrix::from_diag(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(completely_passive_check(&ground, &h0, 5).unwrap(), None);
        let gibbs = gibbs_state(&h0, 1.0).unwrap();
        assert_eq!(completely_passive_check(&gibbs, &h0, 5).unwrap(), None);
        let plus = DensityMatrix::pure(&[C64::new(0.6, 0.0), C64::new(0.8, 0.0), C64::new(0.0, 0.0)]).unwrap();
        assert_eq!(completely_passive_check(&plus, &h0, 5).unwrap(), Some(1));
    }

    fn check_schedule(p: &[f64], levels: &[f64], n: usize) -> ExtractionSchedule {
        let s = separable_extraction_schedule(p, levels, n).unwrap();
        for h in &s.hops {
            let (a, b) = (s.digits(h.a), s.digits(h.b));
            let diff: Vec<usize> = (0..n).filter(|&c| a[c] != b[c]).collect();
            assert_eq!(diff, vec![h.cell]);
        }
        let q = product_values(p, n, 1 << 20, |a, b| a * b).unwrap();
        let e = product_values(levels, n, 1 << 20, |a, b| a + b).unwrap();
        let after = s.apply(&q);
        let mut order: Vec<usize> = (0..q.len()).collect();
        order.sort_by(|&a, &b| e[a].total_cmp(&e[b]));
        let mut sorted = q.clone();
        sorted.sort_by(|x, y| y.total_cmp(x));
        for (j, &pos) in order.iter().enumerate() {
            assert!((after[pos] - sorted[j]).abs() < 1e-15);
        }
        let perm = s.permutation();
        assert!(perm.iter().enumerate().all(|(a, &src)| after[a] == q[src]));
        s
    }

    #[test]
    fn two_copy_qutrit_schedule() {
        let p = 0.3;
        let s = check_schedule(&[0.0, p, 1.0 - p], &[0.0, 0.6, 1.0], 2);
        // |33⟩ = 8, |13⟩ = 2, |11⟩ = 0 with zero-based cell indices
        assert_eq!(s.transpositions[0], (8, 0));
        assert_eq!(&s.hops[..3], &[Hop { a: 8, b: 2, cell: 0 }, Hop { a: 2, b: 0, cell: 1 }, Hop { a: 8, b: 2, cell: 0 }]);
    }

    #[test]
    fn schedules_sort_random_products() {
        let mut g = Lcg::new(12);
        for (d, n) in [(2, 4), (3, 3), (4, 2)] {
            let mut p: Vec<f64> = (0..d).map(|_| g.uniform()).collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= s);
            let levels: Vec<f64> = (0..d).map(|i| i as f64 + 0.1 * g.uniform()).collect();
            let sched = check_schedule(&p, &levels, n);
            assert!(sched.hops.len() <= sched.transpositions.len() * (2 * n - 1));
        }
    }

    #[test]
    fn passive_products_need_no_schedule() {
        let s = separable_extraction_schedule(&[0.7, 0.2, 0.1], &[0.0, 1.0, 2.0], 1).unwrap();
        assert!(s.hops.is_empty());
        let ground = separable_extraction_schedule(&[1.0, 0.0], &[0.0, 1.0], 4).unwrap();
        assert!(ground.hops.is_empty());
    }

    #[test]
    fn commuting_drive_has_no_power() {
        let h0 = HermitianOperator::from_real_diag(&[0.0, 1.0, 2.0]);
        let h = HermitianOperator::from_real_diag(&[0.3, -1.0, 0.5]);
        let mut g = Lcg::new(3);
        let orbit = unitary_orbit(&mixed(&mut g, 3), &h, 2.0, 33).unwrap();
        let tr = power_trace(&orbit, &h0).unwrap();
        assert!(tr.power.iter().all(|p| p.abs() < 1e-13));
        assert!(tr.deposited.iter().all(|w| w.abs() < 1e-13));
    }

    #[test]
    fn power_is_derivative_of_work() {
        let mut g = Lcg::new(4);
        let rho = mixed(&mut g, 4);
        let h = rand_hermitian(&mut g, 4);
        let h0 = rand_hermitian(&mut g, 4);
        let orbit = unitary_orbit(&rho, &h, 1.0, 1001).unwrap();
        let tr = power_trace(&orbit, &h0).unwrap();
        for k in 1..1000 {
            let fd = (tr.deposited[k + 1] - tr.deposited[k - 1]) / (tr.times[k + 1] - tr.times[k - 1]);
            assert!((fd - tr.power[k]).abs() < 1e-5, "{k}: {fd} vs {}", tr.power[k]);
        }
        assert!(tr.extracted().iter().zip(&tr.deposited).all(|(a, b)| a == &-b));
    }

    #[test]
    fn ladder_charges_full_work() {
        let levels = [-1.0, 0.2, 1.0];
        let model = BatteryModel::new(3, &levels).unwrap();
        let (_, col) = ladder_hamiltonians(3, 3, 2.0).unwrap();
        let dim = col.dim();
        let mut g0 = vec![0.0; dim];
        g0[0] = 1.0;
        let start = DensityMatrix::from_diag(&g0).unwrap();
        let tau = advantage_ladder(3, 2.0).unwrap().tau_collective;
        let orbit = unitary_orbit(&start, &col, tau, 65).unwrap();
        let tr = power_trace(&orbit, &model.total_h0().unwrap()).unwrap();
        assert!((tr.deposited.last().unwrap() - 3.0 * (levels[2] - levels[0])).abs() < 1e-10);
        assert!(tr.power[0].abs() < 1e-12 && tr.power.last().unwrap().abs() < 1e-8);
    }

    #[test]
    fn ladder_times() {
        let one = advantage_ladder(1, 3.0).unwrap();
        assert_eq!(one.gamma, 1.0);
        assert_eq!(one.tau_parallel, one.tau_collective);
        let four = advantage_ladder(4, 1.0).unwrap();
        assert_eq!(four.tau_parallel, 2.0 * core::f64::consts::PI);
        assert_eq!(four.tau_collective, FRAC_PI_2);
        assert_eq!(four.gamma, 4.0);
        assert!(advantage_ladder(0, 1.0).is_err() && advantage_ladder(2, 0.0).is_err());
    }

    #[test]
    fn ladder_orbits_reach_excited_state() {
        for (n, d) in [(1, 2), (2, 2), (4, 2), (2, 3)] {
            let (par, col) = ladder_hamiltonians(n, d, 1.7).unwrap();
            assert!((par.op_norm() - 1.7).abs() < 1e-10 && (col.op_norm() - 1.7).abs() < 1e-10);
            let (a, b) = ladder_infidelities(n, d, 1.7).unwrap();
            assert!(a < 1e-10 && b < 1e-10, "n={n} d={d}: {a} {b}");
        }
    }

    #[test]
    fn separable_ball_values() {
        assert_eq!(advantage_separable_ball(1, 0.5).unwrap(), SeparableBall { gamma_c1: 1.0, gamma_c2: 1.0 });
        assert_eq!(advantage_separable_ball(9, 0.5).unwrap(), SeparableBall { gamma_c1: 3.0, gamma_c2: 9.0 });
        assert_eq!(advantage_separable_ball(9, 0.01).unwrap(), advantage_separable_ball(9, 1.0).unwrap());
    }

    #[test]
    fn separable_ball_simulation_agrees() {
        for n in 1..=4 {
            for &beta in &[0.01, 1.0] {
                let sim = separable_ball_simulation(n, beta, 65).unwrap();
                let exact = advantage_separable_ball(n, beta).unwrap();
                assert!((sim.gamma_c1 - exact.gamma_c1).abs() < 1e-9, "{n} {beta}: {sim:?}");
                assert!((sim.gamma_c2 - exact.gamma_c2).abs() < 1e-9, "{n} {beta}: {sim:?}");
                assert!(sim.endpoint_error < 1e-10);
            }
        }
    }

    #[test]
    fn overhead_values() {
        assert_eq!(trotter_overhead_bound(2, 1), 1);
        assert_eq!(trotter_overhead_bound(2, 2), 3);
        assert_eq!(trotter_overhead_bound(3, 2), 4);
        for (k, m, want) in [(2, 1, 1), (2, 2, 3), (3, 2, 4), (2, 3, 3), (3, 3, 7)] {
            let r = trotter_overhead_search(k, m, 1_000_000).unwrap();
            assert!(r.exhaustive);
            assert_eq!(r.best, want, "k={k} m={m}");
            let fam = &r.family;
            assert!(fam.iter().all(|s| s.len() == k));
            for i in 0..fam.len() {
                for j in 0..i {
                    assert!(fam[i].iter().any(|x| fam[j].contains(x)));
                }
            }
            let max_deg = (0..64).map(|x| fam.iter().filter(|s| s.contains(&x)).count()).max().unwrap();
            assert!(max_deg <= m);
        }
    }

    #[test]
    fn advantage_bound_cases() {
        let mut p = AdvantageParams::new(5, 5, 1);
        assert!((advantage_upper_bound(Constraint::C0, &p).unwrap() - 5.0 * FRAC_PI_2).abs() < 1e-15);
        p.k = 2;
        p.m = 2;
        assert!((advantage_upper_bound(Constraint::C0, &p).unwrap() - FRAC_PI_2 * 6.0).abs() < 1e-15);
        p.bures_ratio = 0.5;
        p.s_factor = 2.0;
        assert!((advantage_upper_bound(Constraint::C1, &p).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert!((advantage_upper_bound(Constraint::C2, &p).unwrap() - 5.0).abs() < 1e-15);
        p.k = 6;
        assert!(advantage_upper_bound(Constraint::C0, &p).is_err());
    }

    #[test]
    fn tensor_fidelity_is_multiplicative() {
        let mut g = Lcg::new(21);
        for d in 2..=3 {
            for n in 1..=3 {
                let rho = mixed(&mut g, d);
                let sigma = mixed(&mut g, d);
                let dense = crate::metrics::bures_angle(&rho.tensor_power(n).unwrap(), &sigma.tensor_power(n).unwrap())
                    .unwrap();
                assert!((tensor_bures_angle(&rho, &sigma, n).unwrap() - dense).abs() < 1e-9);
            }
        }
        // orthogonal pure states stay orthogonal
        let a = DensityMatrix::from_diag(&[1.0, 0.0]).unwrap();
        let b = DensityMatrix::from_diag(&[0.0, 1.0]).unwrap();
        assert!((bures_ratio(&a, &b, 4).unwrap() - 1.0).abs() < 1e-15);
        assert!(bures_ratio(&a, &a, 2).is_err());
    }

    #[test]
    fn trotter_error_is_first_order() {
        let mut g = Lcg::new(30);
        let (a, b, c) = (rand_hermitian(&mut g, 3), rand_hermitian(&mut g, 3), rand_hermitian(&mut g, 3));
        let layer = |j: usize, t: f64| if j == 0 { a.scale(t.cos()) } else { b.add(&c.scale(t)) };
        let full = |t: f64| layer(0, t).add(&layer(1, t));
        let exact = time_ordered_unitary(full, 1.0, 4096).unwrap();
        let err: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&l| (trotter_unitary(layer, 2, 1.0, l).unwrap().matrix() - exact.matrix()).hs_norm())
            .collect();
        let slope = (err[2] / err[0]).ln() / 4f64.ln();
        assert!((-1.2..=-0.8).contains(&slope), "{err:?} slope {slope}");
    }

    #[test]
    fn embedding_matches_kron() {
        let mut g = Lcg::new(31);
        let a = rand_matrix(&mut g, 2);
        let b = rand_matrix(&mut g, 4);
        let id = ComplexMatrix::identity(2);
        let e = embed_local(&a, &[1], 3, 2);
        assert!((&e - &kron_all(&[id.clone(), a.clone(), id.clone()])).max_abs() < 1e-15);
        let e = embed_local(&b, &[1, 2], 3, 2);
        assert!((&e - &kron(&id, &b)).max_abs() < 1e-15);
        // non-adjacent sites: conjugate the adjacent embedding by the swap of cells 1 and 2
        let swap = ComplexMatrix::from_fn(8, |i, j| {
            let s = (i & 4) | ((i & 1) << 1) | ((i & 2) >> 1);
            C64::new(if s == j { 1.0 } else { 0.0 }, 0.0)
        });
        let adjacent = embed_local(&b, &[0, 1], 3, 2);
        let far = embed_local(&b, &[0, 2], 3, 2);
        assert!((&(&(&swap * &adjacent) * &swap) - &far).max_abs() < 1e-15);
    }

    #[test]
    fn single_qubit_conjecture_ratio() {
        let mut g = Lcg::new(40);
        for _ in 0..10 {
            let (c, ax, ay, az) = (g.normal(), g.normal(), g.normal(), g.normal());
            let h = ComplexMatrix::from_fn(2, |i, j| match (i, j) {
                (0, 0) => C64::new(c + az, 0.0),
                (1, 1) => C64::new(c - az, 0.0),
                (0, 1) => C64::new(ax, -ay),
                _ => C64::new(ax, ay),
            });
            let term = LocalTerm { sites: vec![0], h: HermitianOperator::new(h).unwrap() };
            let a = (ax * ax + ay * ay + az * az).sqrt();
            let want = (ax * ax + ay * ay).sqrt() / (c.abs() + a);
            assert!((conjecture_ratio(&[term], 1).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn conjecture_ratio_is_scale_invariant() {
        let mut s = SampleStream::new(3, 9, 0);
        let terms: Vec<LocalTerm> = k_subsets(3, 2)
            .into_iter()
            .map(|sites| LocalTerm { sites, h: matrix_log_unitary(&haar_unitary(4, &mut s)).unwrap().h })
            .collect();
        let p = conjecture_ratio(&terms, 3).unwrap();
        let scaled: Vec<LocalTerm> =
            terms.iter().map(|t| LocalTerm { sites: t.sites.clone(), h: t.h.scale(3.7) }).collect();
        assert!((conjecture_ratio(&scaled, 3).unwrap() - p).abs() < 1e-12);
    }

    #[test]
    fn small_conjecture_sweep() {
        let s = SampleStream::new(17, 0xC0, 0);
        let r = conjecture_check(3, 2, 50, &s).unwrap();
        assert_eq!(r.values.len(), 50);
        assert!(r.max_p < 1.0 && r.violations.is_empty());
        assert_eq!(r, conjecture_check(3, 2, 50, &s).unwrap());
        assert_eq!(k_subsets(4, 2).len(), 6);
    }

    #[test]
    fn model_and_spec_validation() {
        assert!(BatteryModel::new(2, &[0.0, 0.0]).is_err());
        assert!(BatteryModel::new(0, &[0.0, 1.0]).is_err());
        let m = BatteryModel::new(2, &[0.0, 1.0, 3.0]).unwrap();
        assert_eq!(m.total_levels(100).unwrap(), vec![0.0, 1.0, 3.0, 1.0, 2.0, 4.0, 3.0, 4.0, 6.0]);
        let spec = ChargingSpec { k: 2, m: 1, constraint: Constraint::C0 };
        assert!(spec.validate(4).is_ok());
        assert!(ChargingSpec { k: 5, ..spec }.validate(4).is_err());
        assert!(ChargingSpec { m: 4, ..spec }.validate(4).is_err());
        for c in Constraint::ALL {
            assert_eq!(c.name().parse::<Constraint>().unwrap(), c);
        }
        assert!("c3".parse::<Constraint>().is_err());
    }

    fn random_piecewise(g: &mut Lcg, d: usize, pieces: usize) -> Orbit {
        let rho = mixed(g, d);
        let hs: Vec<(f64, HermitianOperator)> =
            (0..pieces).map(|_| (0.1 + g.uniform(), rand_hermitian(g, d).scale(g.uniform() * 3.0))).collect();
        piecewise_orbit(&rho, &hs, 9).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ergotropy_is_nonnegative_and_vanishes_on_passive(seed in any::<u64>(), d in 2usize..6) {
            let mut g = Lcg::new(seed);
            let rho = mixed(&mut g, d);
            let h0 = rand_hermitian(&mut g, d);
            prop_assert!(ergotropy(&rho, &h0).unwrap() >= 0.0);
            let (sigma, _) = passive_state(&rho, &h0).unwrap();
            prop_assert!(ergotropy(&sigma, &h0).unwrap() < 1e-10);
            let u = rand_unitary(&mut g, d);
            let other = rho.conjugate_by(&u).unwrap();
            prop_assert!(other.expect(&h0) >= sigma.expect(&h0) - 1e-12);
        }

        #[test]
        fn constraint_chain_holds(seed in any::<u64>(), d in 2usize..5, pieces in 1usize..5) {
            let mut g = Lcg::new(seed);
            let orbit = random_piecewise(&mut g, d, pieces);
            let m = ChargingMetrics::of(&orbit).unwrap();
            prop_assert!(m.chain_holds(1e-12), "{:?}", m);
        }
    }
}
