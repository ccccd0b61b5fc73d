use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("non-finite position for particle {particle} at step {step} (t = {time})")]
    NonFinite {
        particle: usize,
        step: u64,
        time: f64,
        /// Ensemble positions just before the failing update.
        snapshot: Vec<f64>,
    },

    #[error("fit did not converge: {reason} (residual {residual:.3e})")]
    FitNonConvergence { reason: String, residual: f64 },

    #[error("time bases differ: {0}")]
    TimeBaseMismatch(String),

    #[error("{path}:{line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
