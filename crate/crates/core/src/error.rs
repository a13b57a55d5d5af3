use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: unsupported audio: {reason}")]
    UnsupportedAudio { path: PathBuf, reason: String },

    #[error("{path}: audio contains no samples")]
    EmptyAudio { path: PathBuf },

    #[error("{path}: duration {seconds:.3}s outside accepted range [{min}s, {max}s]")]
    DurationOutOfRange {
        path: PathBuf,
        seconds: f64,
        min: f64,
        max: f64,
    },

    #[error("clip of {samples} samples is shorter than one {window}-sample window")]
    ClipTooShort { samples: usize, window: usize },

    #[error("unknown emotion label {label:?}; expected one of: {valid}")]
    UnknownLabel { label: String, valid: String },

    #[error("dataset at {0} contains no usable clips")]
    EmptyDataset(PathBuf),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("feature cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error("model file: {0}")]
    Model(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by how the
    /// program was invoked.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidParameter(_) | Error::UnknownLabel { .. })
    }
}
