use std::path::PathBuf;

use thiserror::Error;
use voltvar_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("missing inputs:{}", .0.iter().map(|p| format!("\n  {}", p.display())).collect::<String>())]
    Missing(Vec<PathBuf>),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{0}")]
    Input(String),
}

impl CliError {
    /// 1 input/output, 2 configuration, 3 infeasibility, 4 numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Missing(_) => 1,
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let message = e.to_string();
        match e {
            CoreError::Parameter(_) => CliError::Config(message),
            CoreError::EmptyDataset(_) => CliError::Infeasible(message),
            CoreError::Invariant(_)
            | CoreError::NotConverged { .. }
            | CoreError::Singular { .. }
            | CoreError::NonFinite(_)
            | CoreError::Dimension { .. } => CliError::Numerical(message),
            CoreError::Feeder(_) | CoreError::Format { .. } | CoreError::Io(_) | CoreError::Csv(_) => {
                CliError::Input(message)
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
