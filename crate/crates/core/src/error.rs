use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator, optimizer and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value or shape is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an operation's contract (e.g. control outside the control set).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Internal data structures disagree with each other (e.g. tape vs graph).
    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
