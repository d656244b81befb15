//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by file I/O, validation, training, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{file}: bad magic, expected {expected:?}")]
    BadMagic { file: String, expected: &'static str },

    #[error("{file}: unsupported format version {found}")]
    UnsupportedVersion { file: String, found: u32 },

    #[error("{file}: truncated payload ({context})")]
    Truncated { file: String, context: String },

    #[error("{file}: trailing bytes after payload")]
    TrailingBytes { file: String },

    #[error("non-finite value in {what} at row {row}, column {col}")]
    NonFinite { what: String, row: usize, col: usize },

    #[error("label entry at row {row}, column {col} is {value}; entries must be 0 or 1")]
    LabelDomain { row: usize, col: usize, value: u8 },

    #[error("label row {row} has no positive category")]
    EmptyLabelRow { row: usize },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("mAP undefined: no query has a relevant database item")]
    UndefinedMap,

    #[error("empty query set")]
    EmptyQuerySet,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Convenience constructor for dimension mismatches.
    pub(crate) fn dim(what: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected,
            found,
        }
    }
}
