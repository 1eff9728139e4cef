use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid code parameters: {0}")]
    InvalidCode(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {reason}")]
    InvalidFile { path: PathBuf, reason: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("numerical abort: {0}")]
    NonFinite(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn file(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::InvalidFile {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

impl Error {
    /// Process exit status for the command-line tool: 2 bad arguments,
    /// 3 input-file validation failure, 4 numerical abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite(_) => 4,
            Error::InvalidFile { .. } | Error::Checkpoint(_) | Error::Io { .. } | Error::Csv(_) => 3,
            Error::InvalidCode(_)
            | Error::LengthMismatch { .. }
            | Error::Dimension { .. }
            | Error::Config(_) => 2,
        }
    }
}
