//! Experiment driver behind the `conecs` binary: TOML configs in, CSV files out.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::RunContext;
pub use config::{ExperimentConfig, LoadedConfig};
