//! One function per subcommand. Each returns the files it wrote.

use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::{json, Value};

use qsl_core::batteries::{
    advantage_ladder, advantage_separable_ball, advantage_upper_bound, completely_passive_check, ergotropy,
    ergotropy_gibbs_bound, ladder_infidelities, trotter_overhead_bound, trotter_overhead_search, wmax_per_copy,
    AdvantageParams, ChargingSpec, Constraint,
};
use qsl_core::bounds::{deffner_region_probability_grid, summarize, tightness_sample_at, BoundKind, TightnessRecord};
use qsl_core::matcore::HermitianOperator;
use qsl_core::states::DensityMatrix;

use crate::config::{CommandConfig, ExperimentConfig, SweepKind};
use crate::error::{usage, Result};
use crate::experiments::*;
use crate::output::{write_json, write_table, Cell, Meta, Table};
use crate::stats::{linear_fit, median, percentile, spearman};

/// Largest k·M for which the exact overhead search is attempted.
const SEARCH_LIMIT: usize = 64;
const SEARCH_BUDGET: u64 = 20_000_000;
/// Ladder orbits are only simulated up to this joint dimension.
const LADDER_SIM_CAP: usize = 1024;

/// Runs the configured command on a pool of `cfg.threads` workers (0 = all cores).
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build()?;
    pool.install(|| dispatch(cfg))
}

fn dispatch(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let meta = Meta::of(cfg);
    match &cfg.command {
        CommandConfig::BoundsSweep { d, samples, tau, mode } => bounds_sweep(cfg, &meta, d, *samples, *tau, *mode),
        CommandConfig::DeffnerRegion { grid, resolution } => deffner_region(cfg, &meta, *grid, *resolution),
        CommandConfig::Brach { d, samples, epsilon, variant, spectrum, max_iter } => {
            check_eps(*epsilon)?;
            let runs = (0..*samples)
                .into_par_iter()
                .map(|i| brach_sample(*d, *spectrum, cfg.seed, i, *epsilon, (*variant).into(), *max_iter))
                .collect::<Result<Vec<_>>>()?;
            brach_out(cfg, &meta, *d, &runs)
        }
        CommandConfig::BrachSweep { d, samples, epsilon, variant, spectrum, max_iter } => {
            check_eps(*epsilon)?;
            brach_sweep(cfg, &meta, d, *samples, |d, i| {
                brach_sample(d, *spectrum, cfg.seed, i, *epsilon, (*variant).into(), *max_iter)
            })
        }
        CommandConfig::Perturb { d, samples, delta, kind, epsilon } => {
            check_eps(*epsilon)?;
            perturb(cfg, &meta, *d, *samples, delta, (*kind).into(), *epsilon)
        }
        CommandConfig::Battery { n_cells, k, m, constraint, levels, populations, e_max, gamma } => {
            let spec = ChargingSpec { k: *k, m: *m, constraint: (*constraint).into() };
            spec.validate(*n_cells)?;
            battery(cfg, &meta, *n_cells, &spec, levels, populations, *e_max, *gamma)
        }
        CommandConfig::Conjecture { n_cells, k, samples } => conjecture(cfg, &meta, *n_cells, *k, *samples),
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("epsilon must lie in (0, 1), got {eps}")))
    }
}

fn bounds_sweep(cfg: &ExperimentConfig, meta: &Meta, ds: &[usize], samples: u64, tau: f64, mode: SweepKind) -> Result<Vec<PathBuf>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(usage(format!("tau must be positive, got {tau}")));
    }
    if mode == SweepKind::Analytic {
        if ds != [2] {
            return Err(usage("analytic mode is defined for --d 2 only"));
        }
        let grid: Vec<(f64, f64)> =
            QUBIT_THETAS.iter().flat_map(|&t| qubit_lambda_grid().into_iter().map(move |l| (l, t))).collect();
        let rows = grid.par_iter().map(|&(l, t)| qubit_comparison(l, t)).collect::<Result<Vec<_>>>()?;
        let mut table = Table::new(&[
            "lambda", "theta", "t_l", "t_theta", "t_phi", "t_l_orbit", "t_theta_orbit", "t_phi_orbit",
        ]);
        for c in &rows {
            table.push(vec![
                c.lambda.into(),
                c.theta.into(),
                c.analytic.t_l.into(),
                c.analytic.t_theta.into(),
                c.analytic.t_phi.into(),
                c.orbit.t_l.into(),
                c.orbit.t_theta.into(),
                c.orbit.t_phi.into(),
            ]);
        }
        let worst = rows
            .iter()
            .map(|c| {
                (c.analytic.t_l - c.orbit.t_l)
                    .abs()
                    .max((c.analytic.t_theta - c.orbit.t_theta).abs())
                    .max((c.analytic.t_phi - c.orbit.t_phi).abs())
            })
            .fold(0.0, f64::max);
        let hierarchy = rows.iter().all(|c| {
            let a = c.analytic;
            a.t_theta >= a.t_phi - 1e-12 && a.t_phi >= a.t_l - 1e-12
        });
        return Ok(vec![
            write_table(&cfg.out, "bounds_sweep", cfg.format, meta, &table)?,
            write_json(
                &cfg.out,
                "bounds_sweep_summary",
                meta,
                json!({ "points": rows.len(), "max_orbit_deviation": worst, "hierarchy_holds": hierarchy }),
            )?,
        ]);
    }
    let mut columns = vec!["index", "seed", "d", "purity_rho", "purity_sigma", "tau"];
    columns.extend(BoundKind::ALL.iter().map(|k| k.name()));
    let mut table = Table::new(&columns);
    let mut summaries = Vec::new();
    for &d in ds {
        let recs = (0..samples)
            .into_par_iter()
            .map(|i| tightness_sample_at(d, mode.into(), cfg.seed, i, tau))
            .collect::<qsl_core::Result<Vec<_>>>()?;
        for r in &recs {
            let mut row: Vec<Cell> =
                vec![r.index.into(), cfg.seed.into(), d.into(), r.purity_rho.into(), r.purity_sigma.into(), r.tau.into()];
            row.extend(BoundKind::ALL.iter().map(|&k| Cell::from(r.value(k))));
            table.push(row);
        }
        summaries.push(sweep_summary(d, &recs));
    }
    Ok(vec![
        write_table(&cfg.out, "bounds_sweep", cfg.format, meta, &table)?,
        write_json(&cfg.out, "bounds_sweep_summary", meta, Value::Array(summaries))?,
    ])
}

fn sweep_summary(d: usize, recs: &[TightnessRecord]) -> Value {
    let s = summarize(recs);
    let (mut wins, mut excess) = ([0usize; 3], Vec::new());
    let kinds = [BoundKind::TL, BoundKind::TTheta, BoundKind::TPhi];
    for r in recs {
        let v: Vec<Option<f64>> = kinds.iter().map(|&k| r.value(k)).collect();
        let [Some(l), Some(t), Some(p)] = [v[0], v[1], v[2]] else { continue };
        let best = l.max(t).max(p);
        for (w, x) in wins.iter_mut().zip([l, t, p]) {
            if x == best {
                *w += 1;
            }
        }
        excess.push(l / t.max(p) - 1.0);
    }
    let n = recs.len().max(1) as f64;
    json!({
        "d": d,
        "samples": s.samples,
        "l_wins": s.l_wins,
        "l_win_fraction": s.l_win_fraction,
        "max_excess": s.max_excess,
        "largest_fraction": {
            "t_l": wins[0] as f64 / n,
            "t_theta": wins[1] as f64 / n,
            "t_phi": wins[2] as f64 / n,
        },
        "l_excess_percentiles": {
            "p50": nan_null(percentile(&excess, 0.5)),
            "p90": nan_null(percentile(&excess, 0.9)),
            "p99": nan_null(percentile(&excess, 0.99)),
            "max": nan_null(percentile(&excess, 1.0)),
        },
    })
}

fn nan_null(x: f64) -> Value {
    if x.is_finite() { json!(x) } else { Value::Null }
}

fn deffner_region(cfg: &ExperimentConfig, meta: &Meta, grid: usize, resolution: usize) -> Result<Vec<PathBuf>> {
    if grid == 0 || resolution == 0 {
        return Err(usage("grid and resolution must be positive"));
    }
    let cells: Vec<(f64, f64)> = (1..=grid)
        .flat_map(|i| (1..=grid).map(move |j| (i as f64 / grid as f64, j as f64 / grid as f64)))
        .collect();
    let probs = cells
        .par_iter()
        .map(|&(x, y)| deffner_region_probability_grid(x, y, resolution))
        .collect::<qsl_core::Result<Vec<_>>>()?;
    let mut table = Table::new(&["purity_rho", "purity_sigma", "probability"]);
    for (&(x, y), p) in cells.iter().zip(probs) {
        table.push(vec![x.into(), y.into(), p.into()]);
    }
    Ok(vec![write_table(&cfg.out, "deffner_region", cfg.format, meta, &table)?])
}

fn brach_out(cfg: &ExperimentConfig, meta: &Meta, d: usize, runs: &[BrachSample]) -> Result<Vec<PathBuf>> {
    let data: Vec<Value> = runs
        .iter()
        .map(|s| {
            let history: Vec<Value> = s
                .run
                .history
                .iter()
                .enumerate()
                .map(|(n, r)| {
                    json!({
                        "iteration": n,
                        "parallel_norm": r.parallel_norm,
                        "norm": r.norm,
                        "ratio": r.ratio(),
                        "eta_star": r.eta_star,
                        "tau_delta_e": r.tau_delta_e,
                        "endpoint_error": r.endpoint_error,
                        "phases": r.phases.as_slice(),
                    })
                })
                .collect();
            json!({
                "index": s.index,
                "d": d,
                "variant": s.run.variant.name(),
                "epsilon": s.run.epsilon,
                "converged": s.run.converged,
                "iterations": s.run.iterations,
                "tau_over_tqsl": s.tau_over_tqsl,
                "eta": s.eta,
                "eta_star": s.eta_star,
                "history": history,
            })
        })
        .collect();
    let mut files = vec![write_json(&cfg.out, "brach_runs", meta, Value::Array(data))?];
    let mut table = Table::new(&[
        "index", "iteration", "parallel_norm", "norm", "ratio", "eta_star", "tau_delta_e", "endpoint_error",
    ]);
    for s in runs {
        for (n, r) in s.run.history.iter().enumerate() {
            table.push(vec![
                s.index.into(),
                n.into(),
                r.parallel_norm.into(),
                r.norm.into(),
                r.ratio().into(),
                r.eta_star.into(),
                r.tau_delta_e.into(),
                r.endpoint_error.into(),
            ]);
        }
    }
    files.push(write_table(&cfg.out, "brach_history", cfg.format, meta, &table)?);
    Ok(files)
}

fn brach_sweep(
    cfg: &ExperimentConfig,
    meta: &Meta,
    ds: &[usize],
    samples: u64,
    sample: impl Fn(usize, u64) -> Result<BrachSample> + Sync,
) -> Result<Vec<PathBuf>> {
    let mut table = Table::new(&["d", "index", "iterations", "converged", "tau_over_tqsl", "eta", "eta_star", "max_endpoint_error"]);
    let mut per_d = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &d in ds {
        let runs = (0..samples).into_par_iter().map(|i| sample(d, i)).collect::<Result<Vec<_>>>()?;
        for s in &runs {
            table.push(vec![
                d.into(),
                s.index.into(),
                s.run.iterations.into(),
                s.run.converged.into(),
                s.tau_over_tqsl.into(),
                s.eta.into(),
                s.eta_star.into(),
                s.max_endpoint_error.into(),
            ]);
        }
        let iters: Vec<f64> = runs.iter().filter(|s| s.run.converged).map(|s| s.run.iterations as f64).collect();
        let med = median(&iters);
        if med.is_finite() {
            xs.push((d as f64).ln());
            ys.push(med);
        }
        per_d.push(json!({
            "d": d,
            "runs": runs.len(),
            "converged": iters.len(),
            "median_iterations": nan_null(med),
            "min_tau_over_tqsl": nan_null(runs.iter().map(|s| s.tau_over_tqsl).fold(f64::INFINITY, f64::min)),
            "min_eta_star": nan_null(runs.iter().map(|s| s.eta_star).fold(f64::INFINITY, f64::min)),
        }));
    }
    let fit = if xs.len() >= 2 {
        let f = linear_fit(&xs, &ys);
        json!({ "slope": nan_null(f.slope), "intercept": nan_null(f.intercept), "r2": nan_null(f.r2), "spearman": nan_null(spearman(&xs, &ys)) })
    } else {
        Value::Null
    };
    Ok(vec![
        write_table(&cfg.out, "brach_sweep", cfg.format, meta, &table)?,
        write_json(&cfg.out, "brach_sweep_summary", meta, json!({ "per_d": per_d, "median_iterations_vs_ln_d": fit }))?,
    ])
}

fn perturb(
    cfg: &ExperimentConfig,
    meta: &Meta,
    d: usize,
    samples: u64,
    deltas: &[f64],
    kind: qsl_core::brachistochrone::Perturbation,
    eps: f64,
) -> Result<Vec<PathBuf>> {
    let jobs: Vec<(u64, f64)> = (0..samples).flat_map(|i| deltas.iter().map(move |&x| (i, x))).collect();
    let out = jobs.par_iter().map(|&(i, x)| perturb_sample(d, cfg.seed, i, x, kind, eps)).collect::<Result<Vec<_>>>()?;
    let mut table =
        Table::new(&["d", "index", "delta", "deviation", "base_iterations", "perturbed_iterations", "converged"]);
    for p in &out {
        table.push(vec![
            d.into(),
            p.index.into(),
            p.delta.into(),
            p.deviation.into(),
            p.base_iterations.into(),
            p.perturbed_iterations.into(),
            p.converged.into(),
        ]);
    }
    Ok(vec![write_table(&cfg.out, "perturb", cfg.format, meta, &table)?])
}

#[allow(clippy::too_many_arguments)]
fn battery(
    cfg: &ExperimentConfig,
    meta: &Meta,
    n_max: usize,
    spec: &ChargingSpec,
    levels: &[f64],
    populations: &[f64],
    e_max: f64,
    gamma: f64,
) -> Result<Vec<PathBuf>> {
    if levels.len() != populations.len() || levels.len() < 2 {
        return Err(usage("--levels and --populations need the same length, at least 2"));
    }
    if populations.iter().any(|&p| !(p >= 0.0)) || populations.iter().sum::<f64>() <= 0.0 {
        return Err(usage("populations must be nonnegative with a positive sum"));
    }
    let total: f64 = populations.iter().sum();
    let probs: Vec<f64> = populations.iter().map(|p| p / total).collect();
    let sigma = DensityMatrix::from_diag(&probs)?;
    let h0 = HermitianOperator::from_real_diag(levels);
    let d = levels.len();

    let limit = ergotropy_gibbs_bound(&sigma, &h0)?;
    let wmax = (1..=n_max).into_par_iter().map(|n| wmax_per_copy(&sigma, &h0, n)).collect::<qsl_core::Result<Vec<_>>>()?;
    let mut wt = Table::new(&["n", "wmax_per_copy", "gibbs_limit", "passive_at_n"]);
    for (i, w) in wmax.iter().enumerate() {
        wt.push(vec![(i + 1).into(), (*w).into(), limit.into(), (*w <= 0.0).into()]);
    }

    let mut lt = Table::new(&["n", "tau_parallel", "tau_collective", "gamma", "infidelity_parallel", "infidelity_collective"]);
    let ladder = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let a = advantage_ladder(n, e_max)?;
            let inf = match d.checked_pow(n as u32) {
                Some(dim) if dim <= LADDER_SIM_CAP => Some(ladder_infidelities(n, d, e_max)?),
                _ => None,
            };
            Ok((n, a, inf))
        })
        .collect::<qsl_core::Result<Vec<_>>>()?;
    for (n, a, inf) in ladder {
        lt.push(vec![
            n.into(),
            a.tau_parallel.into(),
            a.tau_collective.into(),
            a.gamma.into(),
            inf.map(|x| x.0).into(),
            inf.map(|x| x.1).into(),
        ]);
    }

    let mut params = AdvantageParams::new(n_max, spec.k, spec.m);
    params.gamma = gamma;
    let mut bounds = serde_json::Map::new();
    for c in Constraint::ALL {
        bounds.insert(c.name().into(), json!(advantage_upper_bound(c, &params)?));
    }
    let m_bound = trotter_overhead_bound(spec.k, spec.m);
    let search = if spec.k * m_bound <= SEARCH_LIMIT {
        let s = trotter_overhead_search(spec.k, spec.m, SEARCH_BUDGET)?;
        json!({ "best": s.best, "exhaustive": s.exhaustive, "nodes": s.nodes, "family": s.family })
    } else {
        Value::Null
    };
    let ball = advantage_separable_ball(n_max, 1.0)?;
    let passive_at = completely_passive_check(&sigma, &h0, n_max.min(6))?;
    let adv = json!({
        "n": n_max,
        "k": spec.k,
        "m": spec.m,
        "gamma": gamma,
        "constraint": spec.constraint.name(),
        "selected_bound": advantage_upper_bound(spec.constraint, &params)?,
        "bounds": bounds,
        "trotter_overhead_bound": m_bound,
        "trotter_overhead_search": search,
        "ladder_gamma": advantage_ladder(n_max, e_max)?.gamma,
        "separable_ball": { "c1": ball.gamma_c1, "c2": ball.gamma_c2 },
        "single_copy_ergotropy": ergotropy(&sigma, &h0)?,
        "gibbs_limit": limit,
        "first_active_copy_number": passive_at,
    });
    Ok(vec![
        write_table(&cfg.out, "battery_wmax", cfg.format, meta, &wt)?,
        write_table(&cfg.out, "battery_ladder", cfg.format, meta, &lt)?,
        write_json(&cfg.out, "battery_advantage", meta, adv)?,
    ])
}

fn conjecture(cfg: &ExperimentConfig, meta: &Meta, n: usize, k: usize, samples: u64) -> Result<Vec<PathBuf>> {
    if k == 0 || k > n {
        return Err(usage(format!("need 1 <= k <= n-cells, got k={k}, n={n}")));
    }
    let values =
        (0..samples).into_par_iter().map(|i| conjecture_value(n, k, cfg.seed, i)).collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&["index", "p"]);
    for (i, p) in values.iter().enumerate() {
        table.push(vec![(i as u64).into(), (*p).into()]);
    }
    let report = qsl_core::batteries::ConjectureReport::from_values(n, k, values);
    let violations: Vec<Value> = report.violations.iter().map(|(i, p)| json!({ "index": i, "p": p })).collect();
    Ok(vec![
        write_table(&cfg.out, "conjecture", cfg.format, meta, &table)?,
        write_json(
            &cfg.out,
            "conjecture_report",
            meta,
            json!({ "n": n, "k": k, "samples": samples, "max_p": nan_null(report.max_p), "violations": violations }),
        )?,
    ])
}
