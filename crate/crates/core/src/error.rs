use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no samples")]
    NoSamples,

    #[error("{quantity} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid cable length l{index} = {value} mm (must be > 0)")]
    InvalidCableLength { index: usize, value: f64 },

    #[error("unreachable target: best residual {residual:.6} mm after {iterations} iterations")]
    Unreachable { residual: f64, iterations: usize },

    #[error("slice {index} at offset {offset} mm is unreachable: {reason}")]
    UnreachableSlice {
        index: usize,
        offset: f64,
        reason: String,
    },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {rejected} of {total} rows rejected (limit 10%); first: {first}")]
    TooManyRejected {
        path: PathBuf,
        rejected: usize,
        total: usize,
        first: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn range(quantity: &'static str, value: f64, min: f64, max: f64) -> Self {
        Error::OutOfRange {
            quantity,
            value,
            min,
            max,
        }
    }
}
