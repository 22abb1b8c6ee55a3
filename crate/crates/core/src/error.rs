use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),

    #[error("degenerate image pair: {0}")]
    DegeneratePair(String),

    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),

    #[error("invalid essential matrix: {0}")]
    InvalidEssential(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("essential matrix estimation failed: {0}")]
    EstimationFailed(String),

    #[error("insufficient image pairs: need at least 2, got {0}")]
    InsufficientPairs(usize),

    #[error("rays are near-collinear ({angle_deg:.4} deg between lines)")]
    NearCollinear { angle_deg: f64 },

    #[error("localization failed: {0}")]
    LocalizationFailed(String),

    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unresolved reference: {0}")]
    Link(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used in result files for failed queries.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidRotation(_) => "invalid-rotation",
            Error::DegeneratePair(_) => "degenerate-pair",
            Error::DegenerateMatrix(_) => "degenerate-matrix",
            Error::InvalidEssential(_) => "invalid-essential",
            Error::InsufficientData { .. } => "insufficient-data",
            Error::DegenerateConfiguration(_) => "degenerate-configuration",
            Error::EstimationFailed(_) => "estimation-failed",
            Error::InsufficientPairs(_) => "insufficient-pairs",
            Error::NearCollinear { .. } => "near-collinear",
            Error::LocalizationFailed(_) => "localization-failed",
            Error::Generation(_) => "generation",
            Error::Format(_) => "format",
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::Link(_) => "link",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}
