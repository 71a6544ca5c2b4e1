//! Command-line surface and cross-validation harness for `ndcal`.

pub mod commands;
pub mod config;
pub mod experiment;

use std::path::Path;

pub use crate::commands::{run, Cli, Command};
pub use crate::config::{CvSpec, DataFormat, ExperimentConfig};
pub use crate::experiment::{run_experiment, run_grid, ResultTable};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] ndcal::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}
