//! Experiment runner for `distopt-core`: JSON configs, CSV/JSON outputs and
//! the `run`, `compare` and `sweep` commands.

pub mod commands;
pub mod config;
pub mod output;

use distopt_core::Error as CoreError;

/// Failures mapped onto the process exit-code contract.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io(_) => 1,
        }
    }

    /// Classifies an error raised while building or validating a run.
    pub fn from_core_setup(e: CoreError, context: &str) -> Self {
        if e.is_numerical() {
            Self::Numerical(format!("{context}: {e}"))
        } else {
            Self::Config(format!("{context}: {e}"))
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(e.to_string())
    }
}
