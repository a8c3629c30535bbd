//! Error type shared by all library modules.

use thiserror::Error;

/// Errors produced by grid construction, rendering, fitting, metrics and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },

    #[error("image dimension mismatch: expected {expected:?}, got {got:?}")]
    ImageDimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point projects behind the camera (depth {0})")]
    BehindCamera(f64),

    #[error("observation has no viewpoint but one is required")]
    MissingViewpoint,

    #[error("point clouds use different units")]
    UnitMismatch,

    #[error("shape does not fit inside the unit cube: {0}")]
    ShapeOutsideCube(String),

    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn format(path: &std::path::Path, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.display().to_string(),
            message: message.into(),
        }
    }
}
