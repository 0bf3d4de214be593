use std::path::PathBuf;

use thiserror::Error;

/// Failure of a command, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{path}: record {record}: {message}")]
    Csv { path: PathBuf, record: u64, message: String },
    #[error(transparent)]
    Model(#[from] pvdg_core::error::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 1 validation, 2 numerical, 3 IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 3,
            CliError::Model(e) if e.is_numerical() => 2,
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
