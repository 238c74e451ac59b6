use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("hilbert space of dimension {dim} exceeds the limit of {limit}")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("integration failed at t = {time:.4} ns: {msg}")]
    Integration { time: f64, msg: String },

    #[error("undefined result: {0}")]
    Undefined(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
