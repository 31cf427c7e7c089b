//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by data loading, index construction, calibration and
/// the simulation lab.
#[derive(Debug, Error)]
pub enum TruhError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("input contains no data rows")]
    EmptyInput,

    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("baseline sample too small: need at least {needed} rows, got {got}")]
    InsufficientBaseline { needed: usize, got: usize },

    #[error("fold-change parameter must be >= 1, got {0}")]
    InvalidTau(f64),

    #[error("no nearest-neighbor distances to aggregate")]
    EmptyDistances,

    #[error("k = {k} exceeds the number of rows {n_rows}")]
    KTooLarge { k: usize, n_rows: usize },

    #[error("corner index {index} out of range for k = {k}")]
    IndexOutOfRange { index: usize, k: usize },

    #[error("every mixing draw was infeasible (a class smaller than n cannot source a pure corner)")]
    AllDrawsInfeasible,

    #[error("alpha must lie in {range}, got {alpha}")]
    InvalidAlpha { alpha: f64, range: &'static str },

    #[error("weight lower bound L must lie in (0, 1], got {0}")]
    InvalidL(f64),

    #[error("matrix is not positive definite (Cholesky failed at pivot {0})")]
    NotPositiveDefinite(usize),

    #[error("invalid mixture specification: {0}")]
    InvalidSpec(String),

    #[error("unknown scenario: {0}")]
    UnknownScenario(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TruhError>;
