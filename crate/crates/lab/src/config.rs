//! Serializable experiment descriptions. A config plus the tool version determines every
//! output byte; the output directory and thread count are excluded from the hash.

use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qsl_core::batteries::Constraint;
use qsl_core::bounds::SweepMode;
use qsl_core::brachistochrone::{Perturbation, Variant};
use qsl_core::ensembles::SpectrumMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Bures-random mixed initial states.
    Bures,
    /// Haar-random pure initial states.
    Pure,
    /// Qubit closed forms against orbit evaluation (d = 2 only).
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Spectrum {
    Pure,
    Mixed,
}

impl Spectrum {
    pub fn mode(self) -> SpectrumMode {
        match self {
            Spectrum::Pure => SpectrumMode::Pure,
            Spectrum::Mixed => SpectrumMode::Mixed,
        }
    }

    pub fn default_epsilon(self) -> f64 {
        match self {
            Spectrum::Pure => qsl_core::brachistochrone::DEFAULT_EPS_PURE,
            Spectrum::Mixed => qsl_core::brachistochrone::DEFAULT_EPS_MIXED,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Forward,
    Backward,
    TwoSided,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Forward => Variant::Forward,
            VariantArg::Backward => Variant::Backward,
            VariantArg::TwoSided => Variant::TwoSided,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbKind {
    Convex,
    Unitary,
}

impl From<PerturbKind> for Perturbation {
    fn from(k: PerturbKind) -> Self {
        match k {
            PerturbKind::Convex => Perturbation::Convex,
            PerturbKind::Unitary => Perturbation::Unitary,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintArg {
    C0,
    C1,
    C2,
    Opnorm,
}

impl From<ConstraintArg> for Constraint {
    fn from(c: ConstraintArg) -> Self {
        match c {
            ConstraintArg::C0 => Constraint::C0,
            ConstraintArg::C1 => Constraint::C1,
            ConstraintArg::C2 => Constraint::C2,
            ConstraintArg::Opnorm => Constraint::OpNorm,
        }
    }
}

impl From<SweepKind> for SweepMode {
    fn from(k: SweepKind) -> Self {
        match k {
            SweepKind::Pure => SweepMode::Pure,
            _ => SweepMode::Bures,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum CommandConfig {
    BoundsSweep { d: Vec<usize>, samples: u64, tau: f64, mode: SweepKind },
    DeffnerRegion { grid: usize, resolution: usize },
    Brach { d: usize, samples: u64, epsilon: f64, variant: VariantArg, spectrum: Spectrum, max_iter: usize },
    BrachSweep { d: Vec<usize>, samples: u64, epsilon: f64, variant: VariantArg, spectrum: Spectrum, max_iter: usize },
    Perturb { d: usize, samples: u64, delta: Vec<f64>, kind: PerturbKind, epsilon: f64 },
    Battery {
        n_cells: usize,
        k: usize,
        m: usize,
        constraint: ConstraintArg,
        levels: Vec<f64>,
        populations: Vec<f64>,
        e_max: f64,
        gamma: f64,
    },
    Conjecture { n_cells: usize, k: usize, samples: u64 },
}

impl CommandConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CommandConfig::BoundsSweep { .. } => "bounds-sweep",
            CommandConfig::DeffnerRegion { .. } => "deffner-region",
            CommandConfig::Brach { .. } => "brach",
            CommandConfig::BrachSweep { .. } => "brach-sweep",
            CommandConfig::Perturb { .. } => "perturb",
            CommandConfig::Battery { .. } => "battery",
            CommandConfig::Conjecture { .. } => "conjecture",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: CommandConfig,
    pub seed: u64,
    pub format: Format,
    pub out: PathBuf,
    #[serde(default)]
    pub threads: usize,
}

#[derive(Serialize)]
struct Hashed<'a> {
    command: &'a CommandConfig,
    seed: u64,
    format: Format,
    version: &'static str,
}

impl ExperimentConfig {
    /// The parts of the config that determine output content.
    pub fn canonical_json(&self) -> serde_json::Value {
        serde_json::to_value(Hashed { command: &self.command, seed: self.seed, format: self.format, version: crate::VERSION })
            .expect("config serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical_json()).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            command: CommandConfig::Conjecture { n_cells: 3, k: 2, samples: 10 },
            seed: 7,
            format: Format::Csv,
            out: "a".into(),
            threads: 0,
        }
    }

    #[test]
    fn hash_ignores_output_location_and_threads() {
        let a = sample();
        let b = ExperimentConfig { out: "elsewhere".into(), threads: 3, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = ExperimentConfig { seed: 8, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn config_round_trips_through_json() {
        let a = sample();
        let text = serde_json::to_string(&a).unwrap();
        assert!(text.contains("\"name\":\"conjecture\""));
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(a, back);
    }
}
