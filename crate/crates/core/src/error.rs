use thiserror::Error;

use crate::dataio::IdxError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// A matrix that must be positive definite was not. Raised instead of
    /// falling back to a pseudo-inverse.
    #[error("{0} is singular or not positive definite")]
    Singular(&'static str),

    #[error("pilot estimation needs at least one pilot repetition")]
    NoPilot,

    #[error("learning rate {eta} exceeds 1/(2 mu) = {max}")]
    LearningRateTooLarge { eta: f64, max: f64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("sample index {index} out of range for dataset of {len} rows")]
    InvalidIndex { index: usize, len: usize },

    #[error("label {0} is not +1 or -1")]
    InvalidLabel(f64),

    #[error("digit label {0} is outside 0..=9")]
    InvalidDigit(u8),

    #[error("need {needed} samples but only {available} are available")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("model vector has a non-finite entry at index {0}")]
    NonFinite(usize),

    #[error(transparent)]
    Idx(#[from] IdxError),

    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
