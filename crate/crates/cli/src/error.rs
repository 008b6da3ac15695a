use std::path::Path;

use thiserror::Error;

/// Command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn file(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<delu_core::Error> for CliError {
    fn from(err: delu_core::Error) -> Self {
        use delu_core::Error as E;
        match err {
            E::Argument(_) => CliError::Usage(err.to_string()),
            E::Io(_) | E::Parse { .. } | E::Invalid { .. } => CliError::Io(err.to_string()),
            E::Solver(_) | E::InfeasiblePoint { .. } | E::UndefinedRatio { .. } | E::Internal(_) => {
                CliError::Numeric(err.to_string())
            }
        }
    }
}
