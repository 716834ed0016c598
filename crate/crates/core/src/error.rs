use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("row {row}: time must be positive and finite, got {value}")]
    InvalidTime { row: usize, value: f64 },

    #[error("row {row}: feature {column} is not finite")]
    NonFiniteFeature { row: usize, column: usize },

    #[error("dataset needs at least {required} records, got {found}")]
    TooFewRecords { required: usize, found: usize },

    #[error("no observed events; the partial likelihood is undefined")]
    NoEvents,

    #[error("no comparable pairs")]
    NoComparablePairs,

    #[error("k = {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("every anchor has zero ideal DCG")]
    DegenerateSimilarity,

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch} (last beta {beta:?})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        beta: Vec<f64>,
    },

    #[error("gamma={gamma}, k={k}, fold={fold}: {source}")]
    Cell {
        gamma: f64,
        k: usize,
        fold: usize,
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
