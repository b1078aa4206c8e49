//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown vessel preset `{name}`; valid presets are: {valid}")]
    UnknownPreset { name: String, valid: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("incompatible scenario: {0}")]
    IncompatibleScenario(String),

    #[error(
        "waypoint generation gave up after {attempts} attempts for point {index}; \
         loosen min_distance or widen the coordinate ranges"
    )]
    WaypointRejection { attempts: usize, index: usize },

    #[error("csv format error at row {row}: {message}")]
    CsvFormat { row: usize, message: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag for error JSON on stderr.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownPreset { .. } => "unknown_preset",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::IncompatibleScenario(_) => "incompatible_scenario",
            Error::WaypointRejection { .. } => "waypoint_rejection",
            Error::CsvFormat { .. } => "csv_format",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Checkpoint(_) => "checkpoint",
            Error::Metric(_) => "metric",
            Error::Pipeline(_) => "pipeline",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
