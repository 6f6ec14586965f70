//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two buffers that must share a shape do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A water-type table failed validation; the message names the record.
    #[error("water type table: {0}")]
    WaterTable(String),

    /// A statistical model could not be fitted from the given data.
    #[error("model fit: {0}")]
    ModelFit(String),

    /// A file has a format this crate does not read or write.
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    /// A file was recognized but its contents are invalid.
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
