//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by splatfield operations.
#[derive(Error, Debug)]
pub enum Error {
    /// Dimension of an argument does not match what the operation supports.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A collection argument has an unusable size (empty set, K too large, ...).
    #[error("size error: {0}")]
    Size(String),

    /// A scalar parameter is outside its allowed range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Geometric degeneracy such as duplicate centers.
    #[error("degeneracy error: {0}")]
    Degeneracy(String),

    /// The Shepard denominator underflowed at a query point.
    #[error("degenerate support at query point {point:?}: basis mass underflowed")]
    DegenerateSupport { point: Vec<f64> },

    /// A ratio with an identically-zero reference.
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    /// A linear system was numerically singular.
    #[error("conditioning error: {detail} (smallest pivot {smallest_pivot:.3e})")]
    Conditioning { detail: String, smallest_pivot: f64 },

    /// A run configuration was rejected.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
