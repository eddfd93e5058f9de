use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dense dimension {dim} for {what} exceeds the memory budget of {limit}")]
    BudgetExceeded {
        what: &'static str,
        dim: usize,
        limit: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("operator check failed ({role}): deviation {deviation:e} exceeds {tolerance:e}")]
    RoleCheck {
        role: &'static str,
        deviation: f64,
        tolerance: f64,
    },

    #[error("fit window [{t_min}, {t_max}] is invalid: {reason}")]
    FitWindow {
        t_min: usize,
        t_max: usize,
        reason: String,
    },

    #[error("Harper ground state is degenerate (gap {gap:e})")]
    DegenerateGroundState { gap: f64 },

    #[error("{excluded} of {total} realizations excluded, above the 1% limit")]
    TooManyExcluded { excluded: usize, total: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("linear algebra: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("config error at {location}: {reason}")]
    Config { location: String, reason: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
