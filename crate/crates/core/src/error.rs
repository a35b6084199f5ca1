//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation received an empty input it cannot handle.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Vector/matrix shapes do not line up.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A token id is outside the embedding table.
    #[error("token id {id} out of vocabulary (size {vocab_size})")]
    OutOfVocab { id: u32, vocab_size: usize },

    /// A loss or gradient went non-finite; carries the first offending
    /// parameter name (or "loss" when the scalar itself blew up).
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A caller-supplied argument is invalid.
    #[error("invalid argument: {0}")]
    InvalidArg(String),

    /// A required data precondition does not hold (bad qrels, no feedback
    /// documents, malformed record, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit-code category used by the CLI: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArg(_) => 2,
            Error::NonFinite(_) => 4,
            _ => 3,
        }
    }
}
