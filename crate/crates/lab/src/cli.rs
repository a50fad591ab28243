//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use qsl_core::batteries::DEFAULT_GAMMA;
use qsl_core::bounds::{DEFFNER_GRID, TIGHTNESS_TAU};
use qsl_core::brachistochrone::DEFAULT_MAX_ITER;

use crate::config::*;
use crate::error::{usage, Result, EXIT_OK};

#[derive(Parser, Debug)]
#[command(name = "qsl", version, about = "Quantum speed limit, brachistochrone and battery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Option<Cmd>,
    /// Replay a config file written by an earlier run (or by hand).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory [default: qsl-out, or the one named in --config].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Args, Debug)]
struct BrachArgs {
    #[arg(long, value_enum, default_value = "forward")]
    variant: VariantArg,
    #[arg(long, value_enum, default_value = "mixed")]
    spectrum: Spectrum,
    /// Convergence threshold; defaults to 1e-4 for pure and 1e-2 for mixed states.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Bound tightness on random states and Hamiltonians.
    BoundsSweep {
        #[arg(long, value_delimiter = ',', default_value = "3")]
        d: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        samples: u64,
        #[arg(long, default_value_t = TIGHTNESS_TAU)]
        tau: f64,
        #[arg(long, value_enum, default_value = "bures")]
        mode: SweepKind,
    },
    /// Probability that the Bures-type bound beats the sub-fidelity bound, on a purity grid.
    DeffnerRegion {
        #[arg(long, default_value_t = 10)]
        grid: usize,
        #[arg(long, default_value_t = DEFFNER_GRID)]
        resolution: usize,
    },
    /// Brachistochrone runs with full histories.
    Brach {
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        samples: u64,
        #[command(flatten)]
        run: BrachArgs,
    },
    /// Brachistochrone iteration counts and efficiencies over dimensions.
    BrachSweep {
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        d: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        samples: u64,
        #[command(flatten)]
        run: BrachArgs,
    },
    /// Sensitivity of brachistochrone solutions to perturbed boundary states.
    Perturb {
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long, default_value_t = 10)]
        samples: u64,
        #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.05,0.1")]
        delta: Vec<f64>,
        #[arg(long, value_enum, default_value = "convex")]
        kind: PerturbKind,
        #[arg(long, default_value_t = qsl_core::brachistochrone::DEFAULT_EPS_MIXED)]
        epsilon: f64,
    },
    /// Multi-copy work, ladder charging and advantage bounds.
    Battery {
        #[arg(long, default_value_t = 8)]
        n_cells: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, value_enum, default_value = "c0")]
        constraint: ConstraintArg,
        #[arg(long, value_delimiter = ',', default_value = "0,0.579,1")]
        levels: Vec<f64>,
        /// Cell populations in the energy basis; normalized before use.
        #[arg(long, value_delimiter = ',', default_value = "0.538,0.237,0.224")]
        populations: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        e_max: f64,
        #[arg(long, default_value_t = DEFAULT_GAMMA)]
        gamma: f64,
    },
    /// Power ratio of random k-body charging Hamiltonians.
    Conjecture {
        #[arg(long, default_value_t = 3)]
        n_cells: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        samples: u64,
    },
}

fn brach_eps(a: &BrachArgs) -> f64 {
    a.epsilon.unwrap_or_else(|| a.spectrum.default_epsilon())
}

fn to_config(cli: Cli) -> Result<ExperimentConfig> {
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        cfg.threads = cli.threads;
        if let Some(out) = cli.out {
            cfg.out = out;
        }
        return Ok(cfg);
    }
    let Some(cmd) = cli.command else {
        return Err(usage("a subcommand or --config is required (see --help)"));
    };
    let (command, default_format) = match cmd {
        Cmd::BoundsSweep { d, samples, tau, mode } => (CommandConfig::BoundsSweep { d, samples, tau, mode }, Format::Csv),
        Cmd::DeffnerRegion { grid, resolution } => (CommandConfig::DeffnerRegion { grid, resolution }, Format::Csv),
        Cmd::Brach { d, samples, run } => (
            CommandConfig::Brach {
                d,
                samples,
                epsilon: brach_eps(&run),
                variant: run.variant,
                spectrum: run.spectrum,
                max_iter: run.max_iter,
            },
            Format::Json,
        ),
        Cmd::BrachSweep { d, samples, run } => (
            CommandConfig::BrachSweep {
                d,
                samples,
                epsilon: brach_eps(&run),
                variant: run.variant,
                spectrum: run.spectrum,
                max_iter: run.max_iter,
            },
            Format::Csv,
        ),
        Cmd::Perturb { d, samples, delta, kind, epsilon } => {
            (CommandConfig::Perturb { d, samples, delta, kind, epsilon }, Format::Csv)
        }
        Cmd::Battery { n_cells, k, m, constraint, levels, populations, e_max, gamma } => (
            CommandConfig::Battery { n_cells, k, m, constraint, levels, populations, e_max, gamma },
            Format::Csv,
        ),
        Cmd::Conjecture { n_cells, k, samples } => (CommandConfig::Conjecture { n_cells, k, samples }, Format::Csv),
    };
    Ok(ExperimentConfig {
        command,
        seed: cli.seed,
        format: cli.format.unwrap_or(default_format),
        out: cli.out.unwrap_or_else(|| PathBuf::from("qsl-out")),
        threads: cli.threads,
    })
}

/// Parses `args` (program name first), runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = to_config(cli).and_then(|cfg| {
        let files = crate::run(&cfg)?;
        std::fs::create_dir_all(&cfg.out)?;
        std::fs::write(cfg.out.join("config.json"), serde_json::to_string_pretty(&cfg)? + "\n")?;
        Ok(files)
    });
    match outcome {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("qsl: {e}");
            e.exit_code()
        }
    }
}
