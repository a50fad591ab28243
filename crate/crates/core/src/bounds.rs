//! Quantum speed limit evaluators and the machinery for comparing them along a shared orbit.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::dynamics::{
    avg_energy_above_ground, avg_relative_speed, avg_speed_hs, avg_std_energy, q_phi, q_theta, unitary_orbit, Orbit,
};
use crate::ensembles::{bures_state, haar_state_vector, random_hamiltonian, SampleStream};
use crate::error::domain;
use crate::matcore::{matrix_exp_skewh, ComplexMatrix, HermitianOperator};
use crate::metrics::{bures_angle, fidelity, fubini_study, gba_theta, phi_angle, sub_fidelity, PURITY_TOL};
use crate::states::DensityMatrix;
use crate::{Error, Result, C64, HBAR};

/// Largest HS gap tolerated between a declared endpoint and the orbit.
pub const ENDPOINT_TOL: f64 = 1e-6;
/// Purity threshold for treating a state as pure.
pub const PURE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundKind {
    Mt,
    Ml,
    UnifiedPure,
    TL,
    TTheta,
    TPhi,
    TUnified,
    TD,
    TSun,
    TDelCampo,
    TDeffner,
    TSunStar,
    TDeffnerStar,
}

impl BoundKind {
    pub const ALL: [BoundKind; 13] = [
        Self::Mt,
        Self::Ml,
        Self::UnifiedPure,
        Self::TL,
        Self::TTheta,
        Self::TPhi,
        Self::TUnified,
        Self::TD,
        Self::TSun,
        Self::TDelCampo,
        Self::TDeffner,
        Self::TSunStar,
        Self::TDeffnerStar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mt => "mt",
            Self::Ml => "ml",
            Self::UnifiedPure => "unified_pure",
            Self::TL => "t_l",
            Self::TTheta => "t_theta",
            Self::TPhi => "t_phi",
            Self::TUnified => "t_unified",
            Self::TD => "t_d",
            Self::TSun => "t_sun",
            Self::TDelCampo => "t_delcampo",
            Self::TDeffner => "t_deffner",
            Self::TSunStar => "t_sun_star",
            Self::TDeffnerStar => "t_deffner_star",
        }
    }
}

/// Preconditions observed when a bound was evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Flags {
    pub rho_pure: bool,
    pub sigma_pure: bool,
    pub equal_purity: bool,
    pub unitary_orbit: bool,
    pub orthogonal: bool,
    /// Zero speed with nonzero distance; the value is +∞.
    pub infinite: bool,
    /// Every precondition under which the bound is proven holds.
    pub valid: bool,
}

/// One evaluated bound. `value = HBAR · distance / speed`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QslReport {
    pub bound: BoundKind,
    pub value: f64,
    pub distance: f64,
    pub speed: f64,
    pub flags: Flags,
}

/// Distances below this are treated as zero when the speed vanishes; arccos-based
/// distances between equal states come out at about √ε.
pub const ZERO_DISTANCE: f64 = 1e-7;

fn report(bound: BoundKind, distance: f64, speed: f64, mut flags: Flags) -> QslReport {
    let value = if speed > 0.0 {
        HBAR * distance / speed
    } else if distance.abs() <= ZERO_DISTANCE {
        0.0
    } else {
        flags.infinite = true;
        f64::INFINITY
    };
    QslReport { bound, value, distance, speed, flags }
}

fn check_endpoints(rho: &DensityMatrix, sigma: &DensityMatrix, orbit: &Orbit) -> Result<()> {
    crate::matcore::check_same_dim(rho.dim(), orbit.initial().dim())?;
    crate::matcore::check_same_dim(sigma.dim(), orbit.last().dim())?;
    let g0 = (rho.matrix() - orbit.initial().matrix()).hs_norm();
    let g1 = (sigma.matrix() - orbit.last().matrix()).hs_norm();
    let g = g0.max(g1);
    if g > ENDPOINT_TOL {
        return Err(Error::EndpointMismatch(g));
    }
    Ok(())
}

fn base_flags(rho: &DensityMatrix, sigma: &DensityMatrix, orbit: &Orbit) -> Flags {
    let (x, y) = (rho.purity(), sigma.purity());
    Flags {
        rho_pure: (x - 1.0).abs() <= PURE_TOL,
        sigma_pure: (y - 1.0).abs() <= PURE_TOL,
        equal_purity: (x - y).abs() <= PURITY_TOL * x.max(y),
        unitary_orbit: orbit.is_unitary(),
        orthogonal: rho.overlap(sigma).abs() <= 1e-12,
        infinite: false,
        valid: false,
    }
}

fn pure_pair(psi: &[C64], phi: &[C64], orbit: &Orbit) -> Result<(f64, Flags)> {
    let dist = fubini_study(psi, phi)?;
    let (r, s) = (DensityMatrix::pure(psi)?, DensityMatrix::pure(phi)?);
    check_endpoints(&r, &s, orbit)?;
    let mut f = base_flags(&r, &s, orbit);
    f.orthogonal = crate::matcore::inner(psi, phi).norm() <= 1e-8;
    if !f.unitary_orbit {
        return Err(domain("pure-state bounds need a unitary orbit"));
    }
    Ok((dist, f))
}

/// Mandelstam-Tamm type bound d_FS(ψ, φ)/ΔĒ.
pub fn bound_mt_pure(psi: &[C64], phi: &[C64], orbit: &Orbit) -> Result<QslReport> {
    let (dist, mut f) = pure_pair(psi, phi, orbit)?;
    f.valid = true;
    Ok(report(BoundKind::Mt, dist, avg_std_energy(orbit)?, f))
}

/// Margolus-Levitin type bound d_FS(ψ, φ)/Ē, with Ē measured from the instantaneous ground
/// energy. Proven for orthogonal endpoints only; `valid` is set accordingly.
pub fn bound_ml_pure(psi: &[C64], phi: &[C64], orbit: &Orbit) -> Result<QslReport> {
    let (dist, mut f) = pure_pair(psi, phi, orbit)?;
    f.valid = f.orthogonal;
    Ok(report(BoundKind::Ml, dist, avg_energy_above_ground(orbit)?, f))
}

/// d_FS(ψ, φ)/max{Ē, ΔĒ}: the weaker of the two energy scales, which keeps the bound valid
/// for every overlap.
pub fn bound_unified_pure(psi: &[C64], phi: &[C64], orbit: &Orbit) -> Result<QslReport> {
    let (dist, mut f) = pure_pair(psi, phi, orbit)?;
    f.valid = true;
    let speed = avg_energy_above_ground(orbit)?.max(avg_std_energy(orbit)?);
    Ok(report(BoundKind::UnifiedPure, dist, speed, f))
}

fn unitary_flags(rho: &DensityMatrix, sigma: &DensityMatrix, orbit: &Orbit) -> Result<Flags> {
    check_endpoints(rho, sigma, orbit)?;
    let f = base_flags(rho, sigma, orbit);
    if !f.unitary_orbit {
        return Err(domain("bound needs a unitary orbit"));
    }
    Ok(f)
}

/// T_ℒ = ℒ(ρ, σ)/ΔĒ.
pub fn bound_tl(rho: &DensityMatrix, sigma: &DensityMatrix, orbit: &Orbit) -> Result<QslReport> {
    let mut f = unitary_flags(rho, sigma, orbit)?;
    f.valid = true;
    Ok(report(BoundKind::TL, bures_angle(rho, sigma)?, avg_std_energy(orbit)?, f))
}

/// T_Θ = Θ(ρ, σ)/Q̄_Θ.
pub fn bound_theta(rho: &DensityMatrix, sigma: &DensityMatrix, orbit: &Orbit) -> Result<QslReport> {
    let mut f = unitary_flags(rho, sigma, orbit)?;
    f.valid = f.equal_purity;
    Ok(report(BoundKind::TTheta, gba_theta(rho, sigma)?, q_theta(orbit)?, f))
}

/// T_Φ = Φ(ρ, σ)/Q̄_Φ.
pub fn bound_phi(rho: &DensityMatrix, sigma: &DensityMatrix, orbit: &Orbit) -> Result<QslReport> {
    let mut f = unitary_flags(rho, sigma, orbit)?;
    f.valid = f.equal_purity;
    Ok(report(BoundKind::TPhi, phi_angle(rho, sigma)?, q_phi(orbit)?, f))
}

/// max{T_ℒ, T_Θ, T_Φ}; distance and speed are those of the winning bound.
pub fn bound_unified_mixed(rho: &DensityMatrix, sigma: &DensityMatrix, orbit: &Orbit) -> Result<QslReport> {
    let parts = [bound_tl(rho, sigma, orbit)?, bound_theta(rho, sigma, orbit)?, bound_phi(rho, sigma, orbit)?];
    let best = parts.iter().fold(parts[0], |a, b| if b.value > a.value { *b } else { a });
    let mut flags = best.flags;
    flags.valid = parts.iter().all(|p| p.flags.valid);
    Ok(QslReport { bound: BoundKind::TUnified, flags, ..best })
}

/// T_D = ‖ρ − σ‖_HS / avg ‖ρ̇_t‖_HS, for any orbit.
pub fn bound_td(rho: &DensityMatrix, sigma: &DensityMatrix, orbit: &Orbit) -> Result<QslReport> {
    check_endpoints(rho, sigma, orbit)?;
    let mut f = base_flags(rho, sigma, orbit);
    f.valid = true;
    let dist = (rho.matrix() - sigma.matrix()).hs_norm();
    let speed = avg_speed_hs(orbit);
    if speed <= 0.0 && dist > 1e-12 {
        return Err(Error::Inconsistent(format!("orbit has zero speed but endpoints differ by {dist:e}")));
    }
    Ok(report(BoundKind::TD, dist, speed, f))
}

fn overlaps(rho: &DensityMatrix, sigma: &DensityMatrix) -> (f64, f64, f64) {
    (rho.purity(), sigma.purity(), rho.overlap(sigma))
}

/// |1 − z/√(xy)| / (2 · avg(‖ρ̇_t‖/‖ρ_t‖)).
pub fn bound_sun(rho: &DensityMatrix, sigma: &DensityMatrix, orbit: &Orbit) -> Result<QslReport> {
    check_endpoints(rho, sigma, orbit)?;
    let mut f = base_flags(rho, sigma, orbit);
    f.valid = true;
    let (x, y, z) = overlaps(rho, sigma);
    let dist = (1.0 - z / (x * y).sqrt()).abs() / 2.0;
    Ok(report(BoundKind::TSun, dist, avg_relative_speed(orbit), f))
}

/// |1 − z/x| ‖ρ‖² / avg ‖ρ̇_t‖.
pub fn bound_delcampo(rho: &DensityMatrix, sigma: &DensityMatrix, orbit: &Orbit) -> Result<QslReport> {
    check_endpoints(rho, sigma, orbit)?;
    let mut f = base_flags(rho, sigma, orbit);
    f.valid = true;
    let (x, _, z) = overlaps(rho, sigma);
    Ok(report(BoundKind::TDelCampo, (1.0 - z / x).abs() * x, avg_speed_hs(orbit), f))
}

/// sin²(arccos F) / avg ‖ρ̇_t‖; proven only when one endpoint is pure.
pub fn bound_deffner(rho: &DensityMatrix, sigma: &DensityMatrix, orbit: &Orbit) -> Result<QslReport> {
    check_endpoints(rho, sigma, orbit)?;
    let mut f = base_flags(rho, sigma, orbit);
    f.valid = f.rho_pure || f.sigma_pure;
    let fid = fidelity(rho, sigma)?;
    Ok(report(BoundKind::TDeffner, 1.0 - fid * fid, avg_speed_hs(orbit), f))
}

/// Sun's distance term with the norm of the purer endpoint pulled out of the average.
/// It dominates [`bound_sun`] whenever ‖ρ_t‖ stays below that norm along the orbit.
pub fn bound_sun_star(rho: &DensityMatrix, sigma: &DensityMatrix, orbit: &Orbit) -> Result<QslReport> {
    check_endpoints(rho, sigma, orbit)?;
    let mut f = base_flags(rho, sigma, orbit);
    f.valid = true;
    let (x, y, z) = overlaps(rho, sigma);
    let dist = (1.0 - z / (x * y).sqrt()).abs() * x.max(y).sqrt() / 2.0;
    Ok(report(BoundKind::TSunStar, dist, avg_speed_hs(orbit), f))
}

/// Deffner's bound with the fidelity replaced by the sub-fidelity E ≤ F.
pub fn bound_deffner_star(rho: &DensityMatrix, sigma: &DensityMatrix, orbit: &Orbit) -> Result<QslReport> {
    check_endpoints(rho, sigma, orbit)?;
    let mut f = base_flags(rho, sigma, orbit);
    f.valid = f.rho_pure || f.sigma_pure;
    let e = sub_fidelity(rho, sigma)?.min(1.0);
    Ok(report(BoundKind::TDeffnerStar, 1.0 - e * e, avg_speed_hs(orbit), f))
}

/// Every mixed-state bound that applies to the orbit. Θ and Φ bounds are skipped on
/// non-unitary orbits, for unequal purities and for maximally mixed endpoints.
pub fn evaluate_all(rho: &DensityMatrix, sigma: &DensityMatrix, orbit: &Orbit) -> Result<Vec<QslReport>> {
    let mut out = Vec::with_capacity(10);
    if orbit.is_unitary() {
        out.push(bound_tl(rho, sigma, orbit)?);
        let f = base_flags(rho, sigma, orbit);
        if f.equal_purity {
            match (bound_theta(rho, sigma, orbit), bound_phi(rho, sigma, orbit)) {
                (Ok(t), Ok(p)) => {
                    out.push(t);
                    out.push(p);
                    out.push(bound_unified_mixed(rho, sigma, orbit)?);
                }
                (Err(Error::UndefinedAngle), _) | (_, Err(Error::UndefinedAngle)) => {}
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
    }
    out.push(bound_td(rho, sigma, orbit)?);
    out.push(bound_sun(rho, sigma, orbit)?);
    out.push(bound_delcampo(rho, sigma, orbit)?);
    out.push(bound_deffner(rho, sigma, orbit)?);
    out.push(bound_sun_star(rho, sigma, orbit)?);
    out.push(bound_deffner_star(rho, sigma, orbit)?);
    Ok(out)
}

/// Sign integrand: √(x + y − 2z) − sin²(arccos E(z, β)) ≥ 0.
pub fn deffner_performance(x: f64, y: f64, z: f64, beta: f64) -> f64 {
    let e2 = z + (2.0 * (z * z - beta)).max(0.0).sqrt();
    let e = e2.max(0.0).sqrt().min(1.0);
    (x + y - 2.0 * z).max(0.0).sqrt() - (1.0 - e * e)
}

/// Default resolution per axis of [`deffner_region_probability`].
pub const DEFFNER_GRID: usize = 1000;

/// Fraction of the region z ∈ [0, √(xy)], β ∈ [0, z²] (uniform area measure) where
/// T_D ≥ T*_Deffner, by composite midpoint quadrature of the sign integrand.
pub fn deffner_region_probability(x: f64, y: f64) -> Result<f64> {
    deffner_region_probability_grid(x, y, DEFFNER_GRID)
}

pub fn deffner_region_probability_grid(x: f64, y: f64, n: usize) -> Result<f64> {
    for v in [x, y] {
        if !(v > 0.0 && v <= 1.0 + 1e-12) {
            return Err(domain(format!("purity {v} outside (0, 1]")));
        }
    }
    if n == 0 {
        return Err(domain("quadrature needs at least one cell"));
    }
    // β = z² s maps the region onto the unit square with weight z²
    let zmax = (x * y).sqrt();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        let z = zmax * (i as f64 + 0.5) / n as f64;
        let w = z * z;
        let mut hits = 0usize;
        for j in 0..n {
            let s = (j as f64 + 0.5) / n as f64;
            if deffner_performance(x, y, z, s * w) >= 0.0 {
                hits += 1;
            }
        }
        num += w * hits as f64;
        den += w * n as f64;
    }
    Ok(num / den)
}

/// Closed-form bounds for the qubit scenario ρ = λ|r₁⟩⟨r₁| + (1−λ)|r₂⟩⟨r₂|,
/// H = |r₁⟩⟨r₂| + h.c., σ = e^{−iHθ} ρ e^{iHθ}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitBounds {
    pub t_l: f64,
    pub t_theta: f64,
    pub t_phi: f64,
}

pub fn qubit_analytic(lambda: f64, theta: f64) -> Result<QubitBounds> {
    if !(0.0..=1.0).contains(&lambda) || lambda == 0.5 {
        return Err(domain(format!("lambda = {lambda} must lie in [0, 1] and differ from 1/2")));
    }
    if !(0.0..=core::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(domain(format!("theta = {theta} outside [0, pi/2]")));
    }
    let k = 1.0 - 2.0 * lambda;
    let k2 = k * k;
    let (c, s, c2) = (theta.cos(), theta.sin(), (2.0 * theta).cos());
    let root = (1.0 - k2 * s * s).max(0.0).sqrt();
    let fp = 0.5 * (1.0 + k2 * c2 + 2.0 * k * c * root).max(0.0).sqrt();
    let fm = 0.5 * (1.0 + k2 * c2 - 2.0 * k * c * root).max(0.0).sqrt();
    let t_l = (fp + fm).min(1.0).acos();
    let t_phi = ((1.0 + k2 * c2) / (1.0 + k2)).sqrt().min(1.0).acos() * ((1.0 + k2) / (2.0 * k2)).sqrt();
    Ok(QubitBounds { t_l, t_theta: theta, t_phi })
}

/// The orbit behind [`qubit_analytic`], sampled on `m` nodes.
pub fn qubit_scenario(lambda: f64, theta: f64, m: usize) -> Result<(DensityMatrix, DensityMatrix, Orbit)> {
    let rho = DensityMatrix::from_diag(&[lambda, 1.0 - lambda])?;
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let h = HermitianOperator::new(ComplexMatrix::from_vec(2, alloc::vec![zero, one, one, zero])?)?;
    let orbit = unitary_orbit(&rho, &h, theta, m)?;
    let sigma = orbit.last().clone();
    Ok((rho, sigma, orbit))
}

/// Which initial states a tightness sweep draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SweepMode {
    #[default]
    Bures,
    Pure,
}

/// Stream id used by tightness sweeps.
pub const TIGHTNESS_STREAM: u64 = 0x7153_4c00;
/// Default evolution time of a sweep sample. Much longer times let the orbit fold back
/// towards ρ, and then every bound is loose for reasons unrelated to the distance used.
pub const TIGHTNESS_TAU: f64 = 0.25;

/// One sample of a tightness sweep: ρ from the chosen ensemble, H = i log U with U Haar,
/// σ = e^{−iHτ} ρ e^{iHτ}, all bounds on the shared orbit.
#[derive(Clone, Debug)]
pub struct TightnessRecord {
    pub index: u64,
    pub d: usize,
    pub purity_rho: f64,
    pub purity_sigma: f64,
    pub tau: f64,
    pub reports: Vec<QslReport>,
}

impl TightnessRecord {
    pub fn value(&self, kind: BoundKind) -> Option<f64> {
        self.reports.iter().find(|r| r.bound == kind).map(|r| r.value)
    }
}

pub fn tightness_sample(d: usize, mode: SweepMode, seed: u64, index: u64) -> Result<TightnessRecord> {
    tightness_sample_at(d, mode, seed, index, TIGHTNESS_TAU)
}

pub fn tightness_sample_at(d: usize, mode: SweepMode, seed: u64, index: u64, tau: f64) -> Result<TightnessRecord> {
    let mut s = SampleStream::new(seed, TIGHTNESS_STREAM + d as u64, index);
    let rho = match mode {
        SweepMode::Bures => bures_state(d, &mut s)?,
        SweepMode::Pure => DensityMatrix::pure(&haar_state_vector(d, &mut s))?,
    };
    let h = random_hamiltonian(d, &mut s)?;
    // every functional is a constant of motion for fixed H, so the endpoints suffice
    let orbit = unitary_orbit(&rho, &h, tau, 2)?;
    let sigma = rho.conjugate_by(&matrix_exp_skewh(&h, tau))?;
    let reports = evaluate_all(&rho, &sigma, &orbit)?;
    Ok(TightnessRecord { index, d, purity_rho: rho.purity(), purity_sigma: sigma.purity(), tau, reports })
}

/// How often the Bures-angle bound beats both geometric bounds, and by how much.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct TightnessSummary {
    pub samples: usize,
    pub l_wins: usize,
    pub l_win_fraction: f64,
    /// Largest T_ℒ/max(T_Θ, T_Φ) − 1 among the wins (0 if none).
    pub max_excess: f64,
}

pub fn summarize(records: &[TightnessRecord]) -> TightnessSummary {
    let mut out = TightnessSummary { samples: records.len(), ..Default::default() };
    for r in records {
        let (Some(l), Some(t), Some(p)) = (r.value(BoundKind::TL), r.value(BoundKind::TTheta), r.value(BoundKind::TPhi))
        else {
            continue;
        };
        let m = t.max(p);
        if l > m {
            out.l_wins += 1;
            out.max_excess = out.max_excess.max(l / m - 1.0);
        }
    }
    if out.samples > 0 {
        out.l_win_fraction = out.l_wins as f64 / out.samples as f64;
    }
    out
}

/// Sequential sweep over `samples` indices; callers wanting parallelism can map
/// [`tightness_sample`] over indices themselves.
pub fn tightness_sweep(
    d: usize,
    samples: u64,
    seed: u64,
    mode: SweepMode,
    tau: f64,
) -> Result<(Vec<TightnessRecord>, TightnessSummary)> {
    let recs = (0..samples).map(|i| tightness_sample_at(d, mode, seed, i, tau)).collect::<Result<Vec<_>>>()?;
    let sum = summarize(&recs);
    Ok((recs, sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{depolarizing_orbit, dilated_orbit, DEFAULT_GRID};
    use crate::matcore::kron;
    use crate::states::mix_with;
    use crate::test_util::{rand_hermitian, rand_matrix, rand_state_vec, Lcg};
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
    use proptest::prelude::*;

    fn mixed(g: &mut Lcg, d: usize) -> DensityMatrix {
        let a = rand_matrix(g, d);
        DensityMatrix::normalized(&a * &a.dagger()).unwrap()
    }

    fn optimal_h(psi: &[C64], phi: &[C64], omega: f64) -> HermitianOperator {
        let ov = crate::matcore::inner(psi, phi);
        let perp: Vec<C64> = phi.iter().zip(psi).map(|(b, a)| b - ov * a).collect();
        let n = crate::matcore::vec_norm(&perp);
        let perp: Vec<C64> = perp.iter().map(|z| z / n).collect();
        let m = &ComplexMatrix::outer(psi, &perp) + &ComplexMatrix::outer(&perp, psi);
        HermitianOperator::hermitize(&m.scale_re(omega))
    }

    #[test]
    fn optimal_hamiltonian_saturates_pure_bound() {
        let mut g = Lcg::new(1);
        for d in [2, 3, 6] {
            let psi = rand_state_vec(&mut g, d);
            let mut phi = rand_state_vec(&mut g, d);
            // make φ orthogonal to ψ
            let ov = crate::matcore::inner(&psi, &phi);
            for (b, a) in phi.iter_mut().zip(&psi) {
                *b -= ov * a;
            }
            let n = crate::matcore::vec_norm(&phi);
            phi.iter_mut().for_each(|z| *z /= n);
            let h = optimal_h(&psi, &phi, 1.0);
            let tau = FRAC_PI_2;
            let rho = DensityMatrix::pure(&psi).unwrap();
            let orbit = unitary_orbit(&rho, &h, tau, 33).unwrap();
            // the orbit reaches φ up to a global phase
            let target = DensityMatrix::pure(&phi).unwrap();
            assert!((orbit.last().matrix() - target.matrix()).hs_norm() < 1e-10);
            let mt = bound_mt_pure(&psi, &phi, &orbit).unwrap();
            assert!((mt.value - tau).abs() < 1e-10);
            assert!((mt.speed - 1.0).abs() < 1e-12);
            let u = bound_unified_pure(&psi, &phi, &orbit).unwrap();
            assert!(u.value <= tau + 1e-10);
            let ml = bound_ml_pure(&psi, &phi, &orbit).unwrap();
            assert!(ml.flags.valid && ml.value <= tau + 1e-10);
        }
    }

    #[test]
    fn pure_bounds_vanish_on_identical_states() {
        let mut g = Lcg::new(2);
        let psi = rand_state_vec(&mut g, 3);
        let rho = DensityMatrix::pure(&psi).unwrap();
        let orbit = unitary_orbit(&rho, &HermitianOperator::zeros(3), 1.0, 3).unwrap();
        assert_eq!(bound_mt_pure(&psi, &psi, &orbit).unwrap().value, 0.0);
        assert_eq!(bound_unified_pure(&psi, &psi, &orbit).unwrap().value, 0.0);
    }

    #[test]
    fn endpoints_must_lie_on_the_orbit() {
        let mut g = Lcg::new(3);
        let psi = rand_state_vec(&mut g, 3);
        let phi = rand_state_vec(&mut g, 3);
        let rho = DensityMatrix::pure(&psi).unwrap();
        let orbit = unitary_orbit(&rho, &rand_hermitian(&mut g, 3), 1.0, 3).unwrap();
        assert!(matches!(bound_mt_pure(&psi, &phi, &orbit), Err(Error::EndpointMismatch(_))));
    }

    #[test]
    fn pure_bounds_never_exceed_duration() {
        let mut g = Lcg::new(4);
        for _ in 0..300 {
            let d = 2 + (g.next_u64() % 5) as usize;
            let psi = rand_state_vec(&mut g, d);
            let h = rand_hermitian(&mut g, d);
            let tau = 0.05 + 3.0 * g.uniform();
            let rho = DensityMatrix::pure(&psi).unwrap();
            let orbit = unitary_orbit(&rho, &h, tau, 3).unwrap();
            let phi = orbit.last().eigenvectors().matrix().column(d - 1);
            for r in [
                bound_mt_pure(&psi, &phi, &orbit).unwrap(),
                bound_unified_pure(&psi, &phi, &orbit).unwrap(),
                bound_tl(&rho, orbit.last(), &orbit).unwrap(),
            ] {
                assert!(r.value <= tau + 1e-8, "{:?} {tau}", r);
            }
            let tl = bound_tl(&rho, orbit.last(), &orbit).unwrap();
            assert!((tl.value - bound_mt_pure(&psi, &phi, &orbit).unwrap().value).abs() < 1e-6);
        }
    }

    #[test]
    fn qubit_scenario_matches_closed_forms() {
        for &theta in &[PI / 8.0, FRAC_PI_4, FRAC_PI_2] {
            for i in 1..50 {
                let lambda = i as f64 / 100.0;
                let (rho, sigma, orbit) = qubit_scenario(lambda, theta, 65).unwrap();
                let a = qubit_analytic(lambda, theta).unwrap();
                let tl = bound_tl(&rho, &sigma, &orbit).unwrap().value;
                let tt = bound_theta(&rho, &sigma, &orbit).unwrap().value;
                let tp = bound_phi(&rho, &sigma, &orbit).unwrap().value;
                assert!((tl - a.t_l).abs() < 1e-6, "{lambda} {theta}");
                assert!((tt - a.t_theta).abs() < 1e-6);
                assert!((tp - a.t_phi).abs() < 1e-6);
                assert!(tt >= tp - 1e-12 && tp >= tl - 1e-12);
            }
            // all three close on θ as √λ when the state becomes pure
            for lambda in [1e-6, 1e-8, 1e-10] {
                let a = qubit_analytic(lambda, theta).unwrap();
                let gap = 10.0 * f64::sqrt(lambda);
                assert!((a.t_theta - a.t_phi).abs() < gap && (a.t_theta - a.t_l).abs() < gap);
            }
        }
    }

    #[test]
    fn pure_qubit_bounds_coincide() {
        let mut g = Lcg::new(5);
        for _ in 0..20 {
            let rho = DensityMatrix::pure(&rand_state_vec(&mut g, 2)).unwrap();
            let orbit = unitary_orbit(&rho, &rand_hermitian(&mut g, 2), 0.4, 3).unwrap();
            let s = orbit.last().clone();
            let tl = bound_tl(&rho, &s, &orbit).unwrap().value;
            let tt = bound_theta(&rho, &s, &orbit).unwrap().value;
            let tp = bound_phi(&rho, &s, &orbit).unwrap().value;
            assert!((tl - tt).abs() < 1e-6 && (tl - tp).abs() < 1e-6);
            let u = bound_unified_mixed(&rho, &s, &orbit).unwrap();
            assert!((u.value - tl.max(tt).max(tp)).abs() < 1e-15);
        }
    }

    #[test]
    fn depolarizing_orbit_is_optimal_for_td() {
        let mut g = Lcg::new(6);
        for d in 2..6 {
            let rho = mixed(&mut g, d);
            let orbit = depolarizing_orbit(&rho, |t| 1.0 - t / 2.0, 1.0, 17).unwrap();
            let r = bound_td(&rho, orbit.last(), &orbit).unwrap();
            assert!((r.value - 1.0).abs() < 1e-9);
        }
        let rho = mixed(&mut g, 3);
        let orbit = depolarizing_orbit(&rho, |_| 1.0, 1.0, 5).unwrap();
        assert_eq!(bound_td(&rho, &rho, &orbit).unwrap().value, 0.0);
    }

    #[test]
    fn td_zero_speed_with_distance_is_inconsistent() {
        let mut g = Lcg::new(7);
        let rho = mixed(&mut g, 2);
        let orbit = unitary_orbit(&rho, &HermitianOperator::zeros(2), 1.0, 3).unwrap();
        // the same state, so the endpoints do lie on the orbit
        assert_eq!(bound_td(&rho, &rho, &orbit).unwrap().value, 0.0);
        let r = bound_sun(&rho, &rho, &orbit).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(!r.flags.infinite);
    }

    #[test]
    fn td_is_invariant_under_inert_ancilla_and_mixing() {
        let mut g = Lcg::new(8);
        for _ in 0..30 {
            let rho = mixed(&mut g, 2);
            let h = rand_hermitian(&mut g, 2);
            let orbit = unitary_orbit(&rho, &h, 0.8, 9).unwrap();
            let base = bound_td(&rho, orbit.last(), &orbit).unwrap().value;
            let alpha = mixed(&mut g, 3);
            let joint = rho.tensor(&alpha).unwrap();
            let hj = HermitianOperator::hermitize(&kron(h.matrix(), &ComplexMatrix::identity(3)));
            let oj = unitary_orbit(&joint, &hj, 0.8, 9).unwrap();
            let comp = bound_td(&joint, oj.last(), &oj).unwrap().value;
            assert!((comp - base).abs() < 1e-9);
            for eps in [0.1, 0.5, 0.9] {
                let mm = DensityMatrix::maximally_mixed(2);
                let r2 = mix_with(&rho, &mm, eps).unwrap();
                let o2 = unitary_orbit(&r2, &h, 0.8, 9).unwrap();
                let v = bound_td(&r2, o2.last(), &o2).unwrap().value;
                assert!((v - base).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn theta_bound_invariant_under_depolarized_endpoints() {
        let mut g = Lcg::new(9);
        for _ in 0..20 {
            let rho = mixed(&mut g, 3);
            let h = rand_hermitian(&mut g, 3);
            let o = unitary_orbit(&rho, &h, 0.6, 3).unwrap();
            let base = bound_theta(&rho, o.last(), &o).unwrap().value;
            let r2 = mix_with(&rho, &DensityMatrix::maximally_mixed(3), 0.4).unwrap();
            let o2 = unitary_orbit(&r2, &h, 0.6, 3).unwrap();
            assert!((bound_theta(&r2, o2.last(), &o2).unwrap().value - base).abs() < 1e-8);
        }
    }

    #[test]
    fn deffner_star_uses_root_overlap_for_pure_rho() {
        let mut g = Lcg::new(10);
        let rho = DensityMatrix::pure(&rand_state_vec(&mut g, 3)).unwrap();
        let env = mixed(&mut g, 2);
        let joint = rand_hermitian(&mut g, 6);
        let orbit = dilated_orbit(&rho, &env, &joint, 1.0, 33).unwrap();
        let sigma = orbit.last().clone();
        let r = bound_deffner_star(&rho, &sigma, &orbit).unwrap();
        assert!((r.distance - (1.0 - rho.overlap(&sigma))).abs() < 1e-9);
        assert!(r.flags.valid);
        let d = bound_deffner(&rho, &sigma, &orbit).unwrap();
        assert!((d.value - r.value).abs() < 1e-6);
    }

    #[test]
    fn all_bounds_vanish_for_equal_states() {
        let mut g = Lcg::new(11);
        let psi = DensityMatrix::pure(&rand_state_vec(&mut g, 3)).unwrap();
        let rho = mixed(&mut g, 3);
        for state in [&psi, &rho] {
            let orbit = unitary_orbit(state, &HermitianOperator::zeros(3), 1.0, 3).unwrap();
            for r in evaluate_all(state, state, &orbit).unwrap() {
                // sub-fidelity of a mixed state with itself is below one, so the
                // Deffner* term does not vanish there
                if r.bound == BoundKind::TDeffnerStar && state.purity() < 1.0 - 1e-9 {
                    assert!(r.distance > 0.0);
                    continue;
                }
                assert!(r.value.abs() < 1e-7, "{:?}", r);
            }
        }
    }

    #[test]
    fn hierarchy_holds_on_mixed_orbit_types() {
        let mut g = Lcg::new(12);
        for i in 0..300 {
            let d = 2 + i % 4;
            let rho = mixed(&mut g, d);
            let orbit = match i % 3 {
                0 => unitary_orbit(&rho, &rand_hermitian(&mut g, d), 0.9, 3).unwrap(),
                1 => depolarizing_orbit(&rho, |t| 1.0 - 0.7 * t, 1.0, 9).unwrap(),
                _ => dilated_orbit(&rho, &mixed(&mut g, 2), &rand_hermitian(&mut g, 2 * d), 1.0, 65).unwrap(),
            };
            let sigma = orbit.last().clone();
            let td = bound_td(&rho, &sigma, &orbit).unwrap().value;
            assert!(td >= bound_sun(&rho, &sigma, &orbit).unwrap().value);
            assert!(td >= bound_delcampo(&rho, &sigma, &orbit).unwrap().value);
            let dp = bound_deffner(&rho, &sigma, &orbit).unwrap().value;
            assert!(bound_deffner_star(&rho, &sigma, &orbit).unwrap().value >= dp - 1e-9);
        }
    }

    #[test]
    fn deffner_region_examples() {
        assert!((deffner_region_probability(1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        // semi-analytic oracle: for fixed z the admissible β form an interval
        let semi = |x: f64, y: f64| {
            let zmax = (x * y).sqrt();
            let n = 20000;
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..n {
                let z = zmax * (i as f64 + 0.5) / n as f64;
                let c = 1.0 - z - (x + y - 2.0 * z).sqrt();
                let frac = if c <= 0.0 { 1.0 } else { (1.0 - c * c / (2.0 * z * z)).clamp(0.0, 1.0) };
                num += z * z * frac;
                den += z * z;
            }
            num / den
        };
        for &(x, y) in &[(0.5, 0.5), (0.3, 0.9), (0.9, 0.2), (0.25, 0.25)] {
            let p = deffner_region_probability(x, y).unwrap();
            assert!((p - semi(x, y)).abs() < 2e-3, "{x} {y} {p} {}", semi(x, y));
            if y >= 1.0 - x {
                assert!(p >= 0.5);
            }
        }
        assert!(deffner_region_probability(0.0, 0.5).is_err());
    }

    #[test]
    fn deffner_region_is_monotone_in_y() {
        for &x in &[0.2, 0.5, 0.8] {
            let mut last = 0.0;
            for j in 1..=10 {
                let y = j as f64 / 10.0;
                let p = deffner_region_probability_grid(x, y, 400).unwrap();
                assert!(p >= last - 2e-3, "{x} {y}");
                last = p;
            }
        }
    }

    #[test]
    fn small_tightness_sweep() {
        let (recs, sum) = tightness_sweep(3, 200, 1, SweepMode::Bures, TIGHTNESS_TAU).unwrap();
        assert_eq!(recs.len(), 200);
        assert!(sum.l_win_fraction < 0.05);
        for r in &recs {
            assert_eq!(r.tau, TIGHTNESS_TAU);
            for rep in &r.reports {
                if rep.flags.valid && rep.bound != BoundKind::TSunStar {
                    assert!(rep.value <= TIGHTNESS_TAU + 1e-8, "{:?}", rep);
                }
            }
        }
        let (pure, _) = tightness_sweep(4, 50, 2, SweepMode::Pure, 1.0).unwrap();
        for r in &pure {
            let (l, p) = (r.value(BoundKind::TL).unwrap(), r.value(BoundKind::TPhi).unwrap());
            assert!((l - p).abs() < 1e-8 * l.max(1.0), "{l} {p}");
        }
        let again = tightness_sample(3, SweepMode::Bures, 1, 17).unwrap();
        assert_eq!(again.reports, recs[17].reports);
        let _ = DEFAULT_GRID;
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn valid_bounds_never_exceed_duration(seed in any::<u64>(), d in 2usize..6, tau in 0.05f64..3.0) {
            let mut g = Lcg::new(seed);
            let rho = mixed(&mut g, d);
            let h = rand_hermitian(&mut g, d);
            let orbit = unitary_orbit(&rho, &h, tau, 3).unwrap();
            let sigma = orbit.last().clone();
            for r in evaluate_all(&rho, &sigma, &orbit).unwrap() {
                if r.flags.valid {
                    prop_assert!(r.value <= tau + 1e-8, "{:?} tau {}", r, tau);
                }
            }
        }

        #[test]
        fn star_variants_dominate(seed in any::<u64>(), d in 2usize..5) {
            let mut g = Lcg::new(seed);
            let rho = mixed(&mut g, d);
            let orbit = unitary_orbit(&rho, &rand_hermitian(&mut g, d), 1.0, 3).unwrap();
            let sigma = orbit.last().clone();
            let sun = bound_sun(&rho, &sigma, &orbit).unwrap().value;
            prop_assert!(bound_sun_star(&rho, &sigma, &orbit).unwrap().value >= sun - 1e-12);
            let de = bound_deffner(&rho, &sigma, &orbit).unwrap().value;
            prop_assert!(bound_deffner_star(&rho, &sigma, &orbit).unwrap().value >= de - 1e-9);
        }
    }
}
