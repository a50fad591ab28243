//! Experiment driver for `qsl-core`: sweeps, brachistochrone runs and battery studies written
//! as CSV or JSON with enough metadata to reproduce them.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod stats;

pub use commands::run;
pub use config::{CommandConfig, ExperimentConfig, Format};
pub use error::{LabError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
