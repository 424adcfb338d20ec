use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("axis {axis} out of range for a tensor with {ndim} axes")]
    InvalidAxis { axis: usize, ndim: usize },

    #[error("axis {0} appears in more than one argument set")]
    OverlappingAxes(usize),

    #[error("distribution is not normalized: total mass {total} (tolerance {tol:e})")]
    NotNormalized { total: f64, tol: f64 },

    #[error("negative or non-finite probability {value} at flat index {index}")]
    InvalidEntry { index: usize, value: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("row {row} of the channel sums to {sum} (tolerance {tol:e})")]
    NotStochastic { row: usize, sum: f64, tol: f64 },

    #[error("alphabet size {size} exceeds the configured maximum {max}")]
    AlphabetOverflow { size: usize, max: usize },

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("value {value} outside the domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("enumeration of {count} grid points exceeds the cap {cap}")]
    GridCap { count: u128, cap: u128 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BoundsError>;
