use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed configuration text. The message carries line/key context.
    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("invalid `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("invalid SBFD pattern `{pattern}`: {reason}")]
    Pattern { pattern: String, reason: String },

    #[error("occupied bandwidth {occupied_hz} Hz exceeds channel bandwidth {bandwidth_hz} Hz")]
    BandwidthOverflow { occupied_hz: f64, bandwidth_hz: f64 },

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("beamformer weights vanish (norm {norm:e})")]
    DegenerateBeam { norm: f64 },

    #[error("dimension mismatch in {context}: expected {expected:?}, found {found:?}")]
    Dimension {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("estimator failure: {0}")]
    Estimator(String),

    #[error("periodogram found {found} separated peaks, {wanted} requested")]
    NoPeaks { found: usize, wanted: usize },

    #[error("transmit symbol magnitude {magnitude} below unit-modulus guard at ({row}, {col})")]
    NonUnitSymbol {
        row: usize,
        col: usize,
        magnitude: f64,
    },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("{failed} of {total} AP trials failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("I/O error on {path}: {source}", path = path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
