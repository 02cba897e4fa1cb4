//! Error types shared across the crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Raster or window shape violates a size requirement.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A pixel coordinate is outside its valid range.
    #[error("index error: {0}")]
    Index(String),

    /// An argument violates a precondition that is not a shape issue.
    #[error("argument error: {0}")]
    Argument(String),

    /// An image file could not be decoded.
    #[error("decode error: {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("feature store: {0}")]
    Store(#[from] StoreError),
}

/// Failures specific to reading or writing the feature store.
#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("version mismatch: expected {expected:?}, found {found:?}")]
    VersionMismatch { expected: String, found: String },

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("inconsistent bin count: {0}")]
    InconsistentBinCount(String),

    #[error("empty store")]
    Empty,

    #[error("invalid field: {0}")]
    InvalidField(String),
}
