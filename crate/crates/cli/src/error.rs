use std::process::ExitCode;

use thiserror::Error;
use ttqst_core::Error as CoreError;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("not converged: {0}")]
    NonConvergence(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 i/o, 2 usage, 3 numerical failure, 4 non-convergence.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::NonConvergence(_) => 4,
        }
    }

    pub fn to_exit(&self) -> ExitCode {
        ExitCode::from(self.exit_code())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io(e) => CliError::Io(e),
            CoreError::Numerical(_) | CoreError::Linalg(_) | CoreError::Oracle(_) => CliError::Numerical(e.to_string()),
            CoreError::InvalidArgument(_)
            | CoreError::DimensionMismatch { .. }
            | CoreError::TooLarge { .. }
            | CoreError::Format(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(e) => CliError::Io(e),
            other => CliError::Usage(format!("csv: {other:?}")),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("json: {e}"))
    }
}
