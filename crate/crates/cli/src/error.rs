use std::path::Path;

use scacsp_core::Error as CoreError;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Failures grouped by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or configuration (exit 2).
    #[error("{0}")]
    Usage(String),

    /// Unreadable, malformed or inconsistent data files (exit 3).
    #[error("{0}")]
    Data(String),

    /// Numerical failure inside training or prediction (exit 4).
    #[error("{context}: {source}")]
    Numerical { context: String, source: CoreError },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical { .. } => 4,
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }

    /// Routes a library error to the matching exit class.
    pub fn core(context: impl Into<String>, err: CoreError) -> Self {
        let context = context.into();
        match &err {
            e if e.is_numerical() => CliError::Numerical { context, source: err },
            CoreError::InvalidArgument(_) | CoreError::InfeasibleFolds(_) => CliError::Usage(format!("{context}: {err}")),
            CoreError::InapplicableProjector { .. } | CoreError::SemiEmpty(_) => {
                CliError::Numerical { context, source: err }
            }
            _ => CliError::Data(format!("{context}: {err}")),
        }
    }
}

/// Attaches a context string to library results.
pub trait Context<T> {
    fn context(self, ctx: impl Into<String>) -> CliResult<T>;
}

impl<T> Context<T> for scacsp_core::Result<T> {
    fn context(self, ctx: impl Into<String>) -> CliResult<T> {
        self.map_err(|e| CliError::core(ctx, e))
    }
}

pub(crate) fn missing(path: &Path) -> CliError {
    CliError::Data(format!("{}: file not found", path.display()))
}
