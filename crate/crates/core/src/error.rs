use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),

    #[error("lambda must be a nonnegative finite number, got {0}")]
    InvalidLambda(f64),

    #[error("state id {id} out of range (|S| = {len})")]
    InvalidState { id: usize, len: usize },

    #[error("action id {id} out of range (|U| = {len})")]
    InvalidAction { id: usize, len: usize },

    #[error("node id {id} out of range (|V| = {len})")]
    InvalidNode { id: usize, len: usize },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("k must be at least 1")]
    InvalidK,

    #[error("sample count n must be at least 1")]
    InvalidSampleCount,

    #[error("belief has length {got}, model has {expected} states")]
    BeliefLength { got: usize, expected: usize },

    #[error("{what}: expected {expected} entries, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("policy set scope does not match the requested operation: {0}")]
    Scope(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

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
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
