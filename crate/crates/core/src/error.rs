use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exact star discrepancy supports dimensions 1 to 3, got {0}")]
    UnsupportedDimension(usize),

    #[error("no kernel moments available for kernel `{0}`")]
    MomentsUnavailable(String),

    #[error("dimension mismatch: population has dimension {population}, reference has {reference}")]
    DimensionMismatch { population: usize, reference: usize },

    #[error("invalid swap: {0}")]
    InvalidSwap(String),

    #[error("instance too large for exhaustive search: {candidates} candidates exceed cap {cap}")]
    InstanceTooLarge { candidates: u128, cap: u64 },

    #[error("matrix is not positive definite (jitter {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("Cholesky factorization failed at every jitter level")]
    AllJitterFailed,

    #[error("evaluation budget of {0} exhausted")]
    BudgetExhausted(usize),

    #[error("rejection sampling failed: {0}")]
    Rejection(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
