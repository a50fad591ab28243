//! Sample-level experiment routines. Each sample draws from its own counter-addressed stream,
//! so results depend only on (seed, parameters, index) and never on scheduling.

use qsl_core::batteries::conjecture_sample;
use qsl_core::bounds::{bound_phi, bound_theta, bound_tl, qubit_analytic, qubit_scenario, QubitBounds};
use qsl_core::brachistochrone::{efficiency_eta, efficiency_eta_star, perturbation_study, solve, BrachistochroneRun, PhaseVector, Perturbation, Variant};
use qsl_core::dynamics::DEFAULT_GRID;
use qsl_core::ensembles::{isospectral_pair, IsospectralPair, SampleStream};

use crate::config::Spectrum;
use crate::error::Result;

pub const BRACH_STREAM: u64 = 0x7153_4200;
pub const PERTURB_STREAM: u64 = 0x7153_5000;
pub const CONJECTURE_STREAM: u64 = 0x7153_4300;

/// The 99 interior points λ = i/200 of (0, 1/2).
pub fn qubit_lambda_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 200.0).collect()
}

pub const QUBIT_THETAS: [f64; 3] =
    [core::f64::consts::FRAC_PI_8, core::f64::consts::FRAC_PI_4, core::f64::consts::FRAC_PI_2];

/// Closed forms next to the same bounds evaluated on the sampled orbit.
#[derive(Clone, Copy, Debug)]
pub struct QubitComparison {
    pub lambda: f64,
    pub theta: f64,
    pub analytic: QubitBounds,
    pub orbit: QubitBounds,
}

pub fn qubit_comparison(lambda: f64, theta: f64) -> Result<QubitComparison> {
    let analytic = qubit_analytic(lambda, theta)?;
    let (rho, sigma, orbit) = qubit_scenario(lambda, theta, DEFAULT_GRID)?;
    let orbit = QubitBounds {
        t_l: bound_tl(&rho, &sigma, &orbit)?.value,
        t_theta: bound_theta(&rho, &sigma, &orbit)?.value,
        t_phi: bound_phi(&rho, &sigma, &orbit)?.value,
    };
    Ok(QubitComparison { lambda, theta, analytic, orbit })
}

/// The isospectral pair and initial phases of brachistochrone sample `index`.
pub fn brach_problem(d: usize, spectrum: Spectrum, seed: u64, index: u64) -> Result<(IsospectralPair, PhaseVector)> {
    let mut s = SampleStream::new(seed, BRACH_STREAM + d as u64, index);
    let pair = isospectral_pair(d, &mut s, &spectrum.mode())?;
    let phi = PhaseVector::random(d, &mut s);
    Ok((pair, phi))
}

#[derive(Clone, Debug)]
pub struct BrachSample {
    pub index: u64,
    pub run: BrachistochroneRun,
    /// τ/T_QSL of the final Hamiltonian at τ = 1.
    pub tau_over_tqsl: f64,
    pub eta: f64,
    pub eta_star: f64,
    /// Largest ‖e^{−iH}ρe^{iH} − σ‖_HS over all iterates.
    pub max_endpoint_error: f64,
}

pub fn brach_sample(
    d: usize,
    spectrum: Spectrum,
    seed: u64,
    index: u64,
    epsilon: f64,
    variant: Variant,
    max_iter: usize,
) -> Result<BrachSample> {
    let (pair, phi) = brach_problem(d, spectrum, seed, index)?;
    let run = solve(&pair.rho, &pair.sigma, &phi, epsilon, variant, max_iter)?;
    let h = run.hamiltonian();
    let (eta, eta_star) = if h.hs_norm() > 0.0 {
        (efficiency_eta(h, &pair.rho)?, efficiency_eta_star(h, &pair.rho)?)
    } else {
        (1.0, 1.0)
    };
    let tau_over_tqsl = run.qsl_ratio()?;
    let max_endpoint_error = run.history.iter().map(|r| r.endpoint_error).fold(0.0, f64::max);
    Ok(BrachSample { index, run, tau_over_tqsl, eta, eta_star, max_endpoint_error })
}

#[derive(Clone, Copy, Debug)]
pub struct PerturbSample {
    pub index: u64,
    pub delta: f64,
    pub deviation: f64,
    pub base_iterations: usize,
    pub perturbed_iterations: usize,
    pub converged: bool,
}

/// Sample `index` uses the same problem for every δ.
pub fn perturb_sample(d: usize, seed: u64, index: u64, delta: f64, kind: Perturbation, epsilon: f64) -> Result<PerturbSample> {
    let mut s = SampleStream::new(seed, PERTURB_STREAM + d as u64, index);
    let pair = isospectral_pair(d, &mut s, &Spectrum::Mixed.mode())?;
    let out = perturbation_study(&pair.rho, &pair.sigma, delta, kind, &mut s, epsilon)?;
    Ok(PerturbSample {
        index,
        delta,
        deviation: out.deviation,
        base_iterations: out.base.iterations,
        perturbed_iterations: out.perturbed.iterations,
        converged: out.base.converged && out.perturbed.converged,
    })
}

pub fn conjecture_value(n: usize, k: usize, seed: u64, index: u64) -> Result<f64> {
    let mut s = SampleStream::new(seed, CONJECTURE_STREAM + (n * 16 + k) as u64, index);
    Ok(conjecture_sample(n, k, &mut s)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qubit_grid_is_interior() {
        let g = qubit_lambda_grid();
        assert_eq!(g.len(), 99);
        assert!(g[0] > 0.0 && g[98] < 0.5);
    }

    #[test]
    fn qubit_comparison_agrees() {
        let c = qubit_comparison(0.2, QUBIT_THETAS[1]).unwrap();
        assert!((c.analytic.t_l - c.orbit.t_l).abs() < 1e-6);
        assert!((c.analytic.t_phi - c.orbit.t_phi).abs() < 1e-6);
    }

    #[test]
    fn samples_are_reproducible() {
        let a = brach_sample(3, Spectrum::Mixed, 4, 2, 1e-2, Variant::Forward, 200).unwrap();
        let b = brach_sample(3, Spectrum::Mixed, 4, 2, 1e-2, Variant::Forward, 200).unwrap();
        assert_eq!(a.run.iterations, b.run.iterations);
        assert_eq!(a.tau_over_tqsl, b.tau_over_tqsl);
        assert_eq!(conjecture_value(3, 2, 1, 5).unwrap(), conjecture_value(3, 2, 1, 5).unwrap());
    }
}
