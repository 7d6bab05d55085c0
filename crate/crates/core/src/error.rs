use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid neighbor scheme: {0}")]
    InvalidScheme(String),

    #[error("no candidate with positive weight")]
    NoCandidate,

    #[error("empty candidate set")]
    EmptyCandidates,

    /// A state with no exit mass under the active neighbor set, or a
    /// parameter outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("state space has {states} states, above the enumeration limit of {limit}")]
    Capacity { states: u128, limit: u128 },

    #[error("structural mismatch: {0}")]
    Structural(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidScheme(_) | Error::Parse(_) | Error::Capacity { .. }
        )
    }
}
