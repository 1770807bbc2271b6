//! Scenario configs, artifact writers and the command dispatch behind `slelab`.

use std::path::PathBuf;

pub mod io;
pub mod scenario;

pub use scenario::{run_scenario, Command, Outcome, ScenarioConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("i/o failure at {}: {message}", path.display())]
    IoFailure { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] slelab_core::Error),
}
