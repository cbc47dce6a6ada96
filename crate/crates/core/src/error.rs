use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The feeder description is inconsistent (bad indices, disconnected graph, ...).
    #[error("invalid feeder: {0}")]
    Feeder(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("singular matrix in {context} (condition estimate {condition:e})")]
    Singular { context: &'static str, condition: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Every scenario of a batch was infeasible.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("iteration cap of {cap} reached in {context} (residual {residual:e})")]
    NotConverged {
        context: &'static str,
        cap: usize,
        residual: f64,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
