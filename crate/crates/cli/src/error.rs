use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("{path}: {source}")]
    Input { path: PathBuf, source: pstop::Error },

    #[error(transparent)]
    Core(#[from] pstop::Error),

    #[error("writing {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("fetch failed: {0}")]
    Fetch(String),
}

impl CliError {
    /// 1 usage, 2 parse/validation, 3 computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Read { .. } | CliError::Input { .. } | CliError::Fetch(_) => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(_) | CliError::Write { .. } => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
