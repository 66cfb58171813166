use std::path::PathBuf;

use thiserror::Error;
use tsp_core::TspError;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config field {field}: {message}")]
    Field { field: String, message: String },

    #[error("missing upstream artifact {}: run `tsp {producer}` first", path.display())]
    MissingArtifact { path: PathBuf, producer: &'static str },

    #[error("stale upstream artifact {}: {reason}; rerun `tsp {producer}`", path.display())]
    StaleArtifact {
        path: PathBuf,
        producer: &'static str,
        reason: String,
    },

    #[error(transparent)]
    Core(#[from] TspError),
}

impl CliError {
    /// 1 for bad input, config or missing prerequisites, 2 for failures
    /// while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if !e.is_validation() => 2,
            _ => 1,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}
