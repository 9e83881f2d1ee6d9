use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the positioning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{stream} stream is not time-ordered at index {index}")]
    NonMonotonic { stream: &'static str, index: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("waypoint {index} at ({x}, {y}) lies outside the area of interest")]
    WaypointOutsideAoi { index: usize, x: f64, y: f64 },

    #[error("target range {range_m:.3} m is beyond the unambiguous range {max_m:.3} m")]
    BeyondUnambiguousRange { range_m: f64, max_m: f64 },

    #[error("transmit symbol at (symbol {row}, subcarrier {col}) is zero")]
    ZeroTransmitSymbol { row: usize, col: usize },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("range {r_3d} m is shorter than the height difference {delta_h} m")]
    ImpossibleRange { r_3d: f64, delta_h: f64 },

    #[error("timestamp {t} does not advance past {last}")]
    NonIncreasingTime { t: f64, last: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("streams do not overlap in time")]
    NoOverlap,

    #[error("invalid percentile {0}; expected a fraction in (0, 1]")]
    InvalidPercentile(f64),

    #[error("event at t={t} precedes the model time origin {origin}")]
    BeforeOrigin { t: f64, origin: f64 },

    #[error("process noise covariance is not symmetric positive semidefinite")]
    NotPsd,

    #[error("unsupported {kind} version {found}")]
    UnsupportedVersion { kind: &'static str, found: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: malformed file: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

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
}
