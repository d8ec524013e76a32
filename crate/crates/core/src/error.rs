use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("stabilization failure at step {step}: {reason}")]
    Stabilization { step: usize, reason: String },

    #[error("point {point}: {failed} of {total} realizations failed (budget exceeded)")]
    PointFailed { point: String, failed: usize, total: usize },

    #[error("config error at line {line}, key `{key}`: {message}")]
    Config { key: String, line: usize, message: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data: {0}")]
    Data(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Domain(_) => "domain",
            Error::Stabilization { .. } => "stabilization",
            Error::PointFailed { .. } => "point_failed",
            Error::Config { .. } => "config",
            Error::Io { .. } => "io",
            Error::Data(_) => "data",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Linalg(_) => "linalg",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
