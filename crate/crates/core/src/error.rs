use thiserror::Error;

/// Errors raised by the tidewave pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("antenna index {index} out of range ({count} antennas configured)")]
    AntennaIndex { index: usize, count: usize },

    #[error("no height sensitivity: transmitter and receiver heights are equal")]
    NoHeightSensitivity,

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
