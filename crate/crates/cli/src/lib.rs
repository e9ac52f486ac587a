//! Declarative experiment runner for `matflow-core`.
//!
//! A run is described by a JSON [`ExperimentConfig`]; [`run`] executes it,
//! writes CSV/JSON artifacts and a `manifest.json` with one verdict per
//! requested check.

use std::path::PathBuf;

pub mod config;
pub mod preset;
pub mod run;

pub use config::{
    config_from_value, emit_config, parse_config, parse_config_in, ExperimentConfig, ExperimentKind, InitSpec,
    OutputFormat, OutputSpec,
};
pub use preset::{preset, preset_for};
pub use run::{run, CheckVerdict, RunManifest, RunStatus};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error(transparent)]
    Core(#[from] matflow_core::Error),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}
