use std::path::PathBuf;

use thiserror::Error;

use crate::nkmeans::RunOutcome;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("graph is not connected after {attempts} attempt(s)")]
    NotConnected { attempts: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dataset contains no points")]
    EmptyData,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Lloyd iteration did not reach a fixed point within {iters} iterations")]
    MaxItersExceeded { iters: usize },

    /// Exhaustive enumeration guard; `assignments` is K^N.
    #[error("enumeration of {assignments} assignments exceeds the limit of {limit}")]
    TooLarge { assignments: f64, limit: u64 },

    #[error("agent {agent} has no neighbors")]
    NoNeighbors { agent: usize },

    #[error("cluster {cluster} is empty at every agent; center system is singular")]
    SingularCluster { cluster: usize },

    #[error("no convergence within {} rounds", .0.rounds_run)]
    MaxRoundsExceeded(Box<RunOutcome>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
