use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("rank {requested} exceeds effective rank {effective}")]
    RankExceeded { requested: usize, effective: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("bad magic at offset {offset}: expected \"IVT1\"")]
    BadMagic { offset: usize },

    #[error("truncated tensor file: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },

    #[error("tensor dimensions overflow addressable size")]
    DimensionOverflow,

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Json(_) => 2,
            Error::Shape(_) | Error::NonFinite(_) | Error::Numeric(_) | Error::RankExceeded { .. } => 3,
            Error::BadMagic { .. } | Error::Truncated { .. } | Error::DimensionOverflow | Error::Io(_) => 4,
        }
    }

    /// Stable machine-readable identifier for the error class.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::Numeric(_) => "numeric_failure",
            Error::RankExceeded { .. } => "rank_exceeded",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config(_) => "config",
            Error::BadMagic { .. } => "bad_magic",
            Error::Truncated { .. } => "truncated",
            Error::DimensionOverflow => "dimension_overflow",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
