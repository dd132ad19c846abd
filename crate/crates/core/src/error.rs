use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = RelocError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RelocError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to load map: {0}")]
    MapLoad(String),

    #[error("failed to parse scan: {0}")]
    ScanParse(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("point ({x:.3}, {y:.3}) lies outside the map")]
    OutOfBounds { x: f64, y: f64 },

    #[error("position ({x:.3}, {y:.3}) is not feasible: {reason}")]
    Infeasible { x: f64, y: f64, reason: String },

    #[error("scan has no valid beams")]
    NoValidBeams,

    #[error("map contains no occupied cells")]
    EmptyMap,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl RelocError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RelocError::Io {
            path: path.into(),
            source,
        }
    }
}
