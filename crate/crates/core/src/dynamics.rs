//! Orbits of states and time-averaged speed functionals along them.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{domain, shape};
use crate::matcore::{
    check_finite_real, eig_hermitian, partial_trace, spectral_apply, ComplexMatrix, HermitianOperator, UnitaryMatrix,
};
use crate::states::DensityMatrix;
use crate::{Error, Result, C64};

/// Default number of grid nodes.
pub const DEFAULT_GRID: usize = 257;

/// Dynamical law that produced an orbit.
#[derive(Clone, Debug)]
pub enum Generator {
    /// Time-independent Hamiltonian.
    Hamiltonian(HermitianOperator),
    /// Piecewise-constant Hamiltonian, as (duration, H) pieces applied in order.
    Piecewise(Vec<(f64, HermitianOperator)>),
    /// Pure dephasing of a qubit at rate γ.
    Dephasing { gamma: f64 },
    /// ρ_t = ε(t) ρ₀ + (1 − ε(t)) 𝟙/d, with ε sampled on the grid.
    Depolarizing { eps: Vec<f64> },
    /// Joint unitary evolution of system and environment, reduced to the system.
    Dilated { h_se: HermitianOperator, env: DensityMatrix },
}

/// Time-sampled trajectory of states.
#[derive(Clone, Debug)]
pub struct Orbit {
    times: Vec<f64>,
    states: Vec<DensityMatrix>,
    generator: Generator,
    // index into the Hamiltonian pieces for every interval [t_k, t_{k+1}]
    segment: Vec<usize>,
}

impl Orbit {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn initial(&self) -> &DensityMatrix {
        &self.states[0]
    }

    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("orbits are nonempty")
    }

    /// τ, the final time.
    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times[0]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// True for Hamiltonian (closed-system) generators.
    pub fn is_unitary(&self) -> bool {
        matches!(self.generator, Generator::Hamiltonian(_) | Generator::Piecewise(_))
    }

    /// Hamiltonian acting on the interval [t_k, t_{k+1}], for unitary orbits.
    pub fn hamiltonian_on(&self, k: usize) -> Option<&HermitianOperator> {
        match &self.generator {
            Generator::Hamiltonian(h) => Some(h),
            Generator::Piecewise(p) => self.segment.get(k).map(|&s| &p[s].1),
            _ => None,
        }
    }

    /// Trapezoid average of f(ρ_t, H_t); both ends of every interval use the Hamiltonian
    /// of that interval, so piecewise generators are integrated without smearing.
    fn average_h(&self, f: impl Fn(&DensityMatrix, &HermitianOperator) -> f64) -> Result<f64> {
        self.average_piece(|r, h, _| f(r, h))
    }

    fn average_piece(&self, f: impl Fn(&DensityMatrix, &HermitianOperator, usize) -> f64) -> Result<f64> {
        if !self.is_unitary() {
            return Err(domain("functional needs a Hamiltonian generator"));
        }
        let tau = self.duration();
        if self.len() < 2 || tau <= 0.0 {
            let h = self.hamiltonian_on(0).ok_or_else(|| domain("empty orbit"))?;
            return Ok(f(&self.states[0], h, 0));
        }
        let mut acc = 0.0;
        for k in 0..self.len() - 1 {
            let h = self.hamiltonian_on(k).expect("interval has a Hamiltonian");
            let seg = self.segment[k];
            let dt = self.times[k + 1] - self.times[k];
            acc += 0.5 * dt * (f(&self.states[k], h, seg) + f(&self.states[k + 1], h, seg));
        }
        Ok(acc / tau)
    }
}

/// Trapezoid average of node values on a grid.
pub fn trapezoid_mean(times: &[f64], values: &[f64]) -> f64 {
    assert_eq!(times.len(), values.len());
    let n = times.len();
    if n < 2 {
        return values.first().copied().unwrap_or(0.0);
    }
    let tau = times[n - 1] - times[0];
    if tau <= 0.0 {
        return values[0];
    }
    let s: f64 = (0..n - 1).map(|k| 0.5 * (times[k + 1] - times[k]) * (values[k] + values[k + 1])).sum();
    s / tau
}

fn uniform_grid(tau: f64, m: usize) -> Result<Vec<f64>> {
    check_finite_real(tau, "tau")?;
    if tau < 0.0 {
        return Err(domain(format!("negative duration {tau}")));
    }
    if m < 2 {
        return Err(domain(format!("grid needs at least 2 nodes, got {m}")));
    }
    Ok((0..m).map(|k| tau * k as f64 / (m - 1) as f64).collect())
}

/// exp(−iHt) from a fixed eigendecomposition of H.
#[derive(Clone, Debug)]
pub struct Propagator {
    vals: Vec<f64>,
    vecs: UnitaryMatrix,
}

impl Propagator {
    pub fn new(h: &HermitianOperator) -> Result<Self> {
        let (vals, vecs) = eig_hermitian(h)?;
        Ok(Self { vals, vecs })
    }

    pub fn at(&self, t: f64) -> UnitaryMatrix {
        let m = spectral_apply(&self.vals, self.vecs.matrix(), |x| C64::new(0.0, -x * t).exp());
        UnitaryMatrix::trusted(m)
    }
}

/// ρ(t_k) = U(t_k) ρ₀ U†(t_k) on a uniform grid of m nodes over [0, τ].
pub fn unitary_orbit(rho0: &DensityMatrix, h: &HermitianOperator, tau: f64, m: usize) -> Result<Orbit> {
    crate::matcore::check_same_dim(rho0.dim(), h.dim())?;
    let times = uniform_grid(tau, m)?;
    let prop = Propagator::new(h)?;
    let mut states = Vec::with_capacity(m);
    states.push(rho0.clone());
    for &t in &times[1..] {
        states.push(rho0.conjugate_by(&prop.at(t))?);
    }
    Ok(Orbit { times, states, generator: Generator::Hamiltonian(h.clone()), segment: alloc::vec![0; m - 1] })
}

/// Piecewise-constant evolution; each piece gets `m_per_piece` nodes, with shared endpoints
/// at the breakpoints.
pub fn piecewise_orbit(rho0: &DensityMatrix, pieces: &[(f64, HermitianOperator)], m_per_piece: usize) -> Result<Orbit> {
    if pieces.is_empty() {
        return Err(domain("piecewise orbit needs at least one piece"));
    }
    if m_per_piece < 2 {
        return Err(domain("each piece needs at least 2 nodes"));
    }
    let mut times = alloc::vec![0.0];
    let mut states = alloc::vec![rho0.clone()];
    let mut segment = Vec::new();
    let mut t0 = 0.0;
    for (s, (dur, h)) in pieces.iter().enumerate() {
        crate::matcore::check_same_dim(rho0.dim(), h.dim())?;
        let grid = uniform_grid(*dur, m_per_piece)?;
        let prop = Propagator::new(h)?;
        let start = states.last().expect("nonempty").clone();
        for &t in &grid[1..] {
            times.push(t0 + t);
            states.push(start.conjugate_by(&prop.at(t))?);
            segment.push(s);
        }
        t0 += dur;
    }
    Ok(Orbit { times, states, generator: Generator::Piecewise(pieces.to_vec()), segment })
}

/// Pure dephasing of a qubit: coherences decay as e^{−2γt}, populations stay.
pub fn dephasing_orbit(rho0: &DensityMatrix, gamma: f64, tau: f64, m: usize) -> Result<Orbit> {
    if rho0.dim() != 2 {
        return Err(domain(format!("dephasing orbit is defined for qubits, got d = {}", rho0.dim())));
    }
    check_finite_real(gamma, "gamma")?;
    if gamma < 0.0 {
        return Err(domain("dephasing rate must be nonnegative"));
    }
    let times = uniform_grid(tau, m)?;
    let mut states = Vec::with_capacity(m);
    for &t in &times {
        let f = (-2.0 * gamma * t).exp();
        let mut a = rho0.matrix().clone();
        a[(0, 1)] *= f;
        a[(1, 0)] *= f;
        states.push(DensityMatrix::new(a)?);
    }
    Ok(Orbit { times, states, generator: Generator::Dephasing { gamma }, segment: Vec::new() })
}

/// ρ_t = ε(t) ρ₀ + (1 − ε(t)) 𝟙/d for a monotone schedule with ε(0) = 1.
pub fn depolarizing_orbit(rho0: &DensityMatrix, eps: impl Fn(f64) -> f64, tau: f64, m: usize) -> Result<Orbit> {
    let times = uniform_grid(tau, m)?;
    let e: Vec<f64> = times.iter().map(|&t| eps(t)).collect();
    if e.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if (e[0] - 1.0).abs() > 1e-12 {
        return Err(domain(format!("schedule must start at 1, got {}", e[0])));
    }
    let up = e.windows(2).all(|w| w[1] >= w[0]);
    let down = e.windows(2).all(|w| w[1] <= w[0]);
    if !(up || down) {
        return Err(domain("depolarizing schedule is not monotone"));
    }
    let d = rho0.dim();
    let id = ComplexMatrix::identity(d).scale_re(1.0 / d as f64);
    let mut states = Vec::with_capacity(m);
    for &x in &e {
        states.push(DensityMatrix::normalized(&rho0.matrix().scale_re(x) + &id.scale_re(1.0 - x))?);
    }
    Ok(Orbit { times, states, generator: Generator::Depolarizing { eps: e }, segment: Vec::new() })
}

/// System part of the joint orbit U_t (ρ₀ ⊗ γ_E) U_t†.
pub fn dilated_orbit(
    rho0: &DensityMatrix,
    env: &DensityMatrix,
    h_se: &HermitianOperator,
    tau: f64,
    m: usize,
) -> Result<Orbit> {
    let (ds, de) = (rho0.dim(), env.dim());
    if h_se.dim() != ds * de {
        return Err(shape(format!("joint Hamiltonian has dim {}, expected {}", h_se.dim(), ds * de)));
    }
    let times = uniform_grid(tau, m)?;
    let joint0 = rho0.tensor(env)?;
    let prop = Propagator::new(h_se)?;
    let mut states = Vec::with_capacity(m);
    for &t in &times {
        let joint = joint0.conjugate_by(&prop.at(t))?;
        states.push(DensityMatrix::normalized(partial_trace(joint.matrix(), &[ds, de], &[0])?)?);
    }
    Ok(Orbit {
        times,
        states,
        generator: Generator::Dilated { h_se: h_se.clone(), env: env.clone() },
        segment: Vec::new(),
    })
}

/// tr[H²ρ² − (Hρ)²], the squared commutator norm over two.
pub fn commutator_variance(rho: &DensityMatrix, h: &HermitianOperator) -> f64 {
    let hr = h.matrix() * rho.matrix();
    let rh = rho.matrix() * h.matrix();
    // tr[H²ρ²] = tr[(ρH)(Hρ)]
    (rh.trace_product(&hr).re - hr.trace_product(&hr).re).max(0.0)
}

/// ‖ρ̇‖_HS = √(2 tr[H²ρ² − (Hρ)²]) for ρ̇ = −i[H, ρ].
pub fn unitary_speed(rho: &DensityMatrix, h: &HermitianOperator) -> f64 {
    (2.0 * commutator_variance(rho, h)).sqrt()
}

/// Energy standard deviation ΔE of H in ρ.
pub fn std_energy(rho: &DensityMatrix, h: &HermitianOperator) -> f64 {
    crate::metrics::std_dev(h, rho)
}

/// Time average of ‖ρ̇_t‖_HS. Hamiltonian and dephasing orbits use the closed-form speed at
/// every node; depolarizing and dilated orbits use finite differences.
pub fn avg_speed_hs(orbit: &Orbit) -> f64 {
    match &orbit.generator {
        Generator::Hamiltonian(_) | Generator::Piecewise(_) => {
            orbit.average_h(unitary_speed).expect("unitary generator")
        }
        Generator::Dephasing { gamma } => {
            let v: Vec<f64> =
                orbit.states.iter().map(|r| 2.0 * core::f64::consts::SQRT_2 * gamma * r.matrix()[(0, 1)].norm()).collect();
            trapezoid_mean(&orbit.times, &v)
        }
        Generator::Depolarizing { .. } | Generator::Dilated { .. } => avg_speed_fd(orbit),
    }
}

/// Time average of ‖ρ̇_t‖_HS/‖ρ_t‖_HS, evaluated by the same route as [`avg_speed_hs`].
pub fn avg_relative_speed(orbit: &Orbit) -> f64 {
    match &orbit.generator {
        Generator::Hamiltonian(_) | Generator::Piecewise(_) => {
            orbit.average_h(|r, h| unitary_speed(r, h) / r.purity().sqrt()).expect("unitary generator")
        }
        Generator::Dephasing { gamma } => {
            let v: Vec<f64> = orbit
                .states
                .iter()
                .map(|r| 2.0 * core::f64::consts::SQRT_2 * gamma * r.matrix()[(0, 1)].norm() / r.purity().sqrt())
                .collect();
            trapezoid_mean(&orbit.times, &v)
        }
        Generator::Depolarizing { .. } | Generator::Dilated { .. } => {
            let tau = orbit.duration();
            if tau <= 0.0 {
                return 0.0;
            }
            let s: f64 = orbit
                .states
                .windows(2)
                .map(|w| {
                    let n = 0.5 * (w[0].purity().sqrt() + w[1].purity().sqrt());
                    (w[1].matrix() - w[0].matrix()).hs_norm() / n
                })
                .sum();
            s / tau
        }
    }
}

/// (1/τ) Σ_k ‖ρ_{k+1} − ρ_k‖_HS, the polygonal length of the orbit over its duration.
pub fn avg_speed_fd(orbit: &Orbit) -> f64 {
    let tau = orbit.duration();
    if tau <= 0.0 {
        return 0.0;
    }
    let len: f64 = orbit.states.windows(2).map(|w| (w[1].matrix() - w[0].matrix()).hs_norm()).sum();
    len / tau
}

fn check_not_maximally_mixed(rho: &DensityMatrix) -> Result<()> {
    let d = rho.dim() as f64;
    if d * rho.purity() - 1.0 < 1e-12 {
        return Err(Error::UndefinedAngle);
    }
    Ok(())
}

/// √(2 tr[ρ²H² − (ρH)²]/(tr[ρ²] − 1/d)) at a single state.
pub fn q_theta_at(rho: &DensityMatrix, h: &HermitianOperator) -> Result<f64> {
    check_not_maximally_mixed(rho)?;
    let den = rho.purity() - 1.0 / rho.dim() as f64;
    Ok((2.0 * commutator_variance(rho, h) / den).sqrt())
}

/// √(tr[ρ²H² − (ρH)²]/tr[ρ²]) at a single state.
pub fn q_phi_at(rho: &DensityMatrix, h: &HermitianOperator) -> Result<f64> {
    check_not_maximally_mixed(rho)?;
    Ok((commutator_variance(rho, h) / rho.purity()).sqrt())
}

/// Time average of the Θ speed along a unitary orbit.
pub fn q_theta(orbit: &Orbit) -> Result<f64> {
    check_not_maximally_mixed(orbit.initial())?;
    orbit.average_h(|r, h| q_theta_at(r, h).unwrap_or(0.0))
}

/// Time average of the Φ speed along a unitary orbit.
pub fn q_phi(orbit: &Orbit) -> Result<f64> {
    check_not_maximally_mixed(orbit.initial())?;
    orbit.average_h(|r, h| q_phi_at(r, h).unwrap_or(0.0))
}

/// Time-averaged energy standard deviation ΔĒ.
pub fn avg_std_energy(orbit: &Orbit) -> Result<f64> {
    orbit.average_h(std_energy)
}

/// Time-averaged energy above the instantaneous ground energy, Ē.
pub fn avg_energy_above_ground(orbit: &Orbit) -> Result<f64> {
    let grounds = piece_ground_energies(orbit)?;
    orbit.average_piece(|r, h, seg| (r.expect(h) - grounds[seg]).max(0.0))
}

/// Time-averaged operator norm ℰ̄ of the Hamiltonian.
pub fn avg_op_norm(orbit: &Orbit) -> Result<f64> {
    orbit.average_h(|_, h| h.op_norm())
}

fn piece_ground_energies(orbit: &Orbit) -> Result<Vec<f64>> {
    match &orbit.generator {
        Generator::Hamiltonian(h) => Ok(alloc::vec![h.eigenvalues()?[0]]),
        Generator::Piecewise(p) => p.iter().map(|(_, h)| Ok(h.eigenvalues()?[0])).collect(),
        _ => Err(domain("functional needs a Hamiltonian generator")),
    }
}
