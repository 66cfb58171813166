use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = TspError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TspError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid embedding file: {0}")]
    Format(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("not applicable: {0}")]
    Inapplicable(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl TspError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        TspError::Io {
            context: context.into(),
            source,
        }
    }

    /// Validation failures (bad input or config) as opposed to runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            TspError::Parse { .. }
                | TspError::EmptyDataset(_)
                | TspError::Config(_)
                | TspError::Shape(_)
                | TspError::Format(_)
        )
    }
}

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(TspError::Config(msg.into()))
}

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(TspError::Shape(msg.into()))
}
