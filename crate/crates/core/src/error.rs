//! Error type shared by all toolkit modules.

use thiserror::Error;

/// Errors produced by model construction, numeric operations and file I/O.
#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("zero-norm descriptor cannot be scored")]
    ZeroNorm,

    #[error("unresolved id {id:?} referenced by pair {pair_index}")]
    MissingId { pair_index: usize, id: String },

    #[error("score set needs at least one positive and one negative label")]
    SingleClass,

    #[error("probe {probe:?} has {mates} mated gallery entries, expected exactly 1")]
    ProbeMateCount { probe: String, mates: usize },

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn dims(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            actual,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
