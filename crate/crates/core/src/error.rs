use std::path::PathBuf;

use thiserror::Error;

use crate::scrub::ScrubFailure;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("load error at row {row}, column {column}: {message}")]
    Load {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("every entity was dropped; nothing left to analyse")]
    EmptyPanel,

    #[error("zero denominator for entity {entity} at {time}")]
    ZeroDenominator { entity: String, time: String },

    #[error("degenerate series for entity {entity}: zero variance")]
    DegenerateSeries { entity: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver did not converge on a {0}x{0} matrix")]
    NoConvergence(usize),

    #[error("degenerate spectral embedding: row {row} is zero before normalization")]
    DegenerateEmbedding { row: usize },

    #[error(
        "partitioning failure: {significant} significant eigenvalue(s) below GE threshold {threshold:.6}"
    )]
    PartitioningFailure { significant: usize, threshold: f64 },

    #[error(
        "level {level} requested at iteration {iteration}, but only {available} level(s) exist"
    )]
    LevelOutOfRange {
        iteration: usize,
        level: usize,
        available: usize,
    },

    #[error(transparent)]
    Scrub(#[from] ScrubFailure),

    #[error("incomplete decomposition record: {0}")]
    IncompleteRecord(String),

    #[error("record cannot be inverted: {0}")]
    Uninvertible(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
