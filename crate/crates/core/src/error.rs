//! Error type shared by every module.

use std::path::PathBuf;

/// Failures surfaced by the library and the `viso` binary.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller violated an operation's precondition (shape mismatch, bad parameter, ...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// A memory file or train split is needed but unavailable.
    #[error("missing memory: {0}")]
    MissingMemory(String),

    /// Outcome files do not cover the same instances.
    #[error("inconsistent instance coverage: {0}")]
    Coverage(String),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json { path: path.into(), source }
    }

    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Io { .. } | Error::Json { .. } | Error::Csv(_) => 3,
            Error::MissingMemory(_) => 4,
            Error::Coverage(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
