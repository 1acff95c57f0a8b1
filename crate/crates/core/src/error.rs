use std::path::PathBuf;

use thiserror::Error;

use crate::lp::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("duplicate prosumer id `{0}`")]
    DuplicateProsumer(String),

    #[error("unknown prosumer id `{0}`")]
    UnknownProsumer(String),

    #[error("prosumer set mismatch: {0}")]
    RosterMismatch(String),

    #[error("{check} refused: {n} prosumers exceeds the cap of {cap}")]
    TooManyProsumers {
        check: &'static str,
        n: usize,
        cap: usize,
    },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("slot {timestamp}: {source}")]
    Slot {
        timestamp: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that indicate a bug rather than bad input.
    pub fn is_internal(&self) -> bool {
        match self {
            Error::Internal(_) => true,
            Error::Lp(e) => e.is_internal(),
            Error::Slot { source, .. } => source.is_internal(),
            _ => false,
        }
    }
}
