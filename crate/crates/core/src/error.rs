use std::path::PathBuf;

use crate::crypto::CryptoError;
use crate::types::TaskId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid scenario configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Crypto(#[from] CryptoError),

    #[error("contribution for task {got} offered to pool for task {expected}")]
    TaskMismatch { expected: TaskId, got: TaskId },

    #[error("no request posted for task {0}")]
    UnknownTask(TaskId),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

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
        Error::Io { path: path.into(), source }
    }

    /// Whether the error came from the file system rather than the input contents.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
