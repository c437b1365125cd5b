use thiserror::Error;

/// Errors raised by grid construction, operator algebra, pricing and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {field} {reason}")]
    InvalidGrid { field: &'static str, reason: String },

    #[error("invalid parameter {field}: {reason}")]
    InvalidParams { field: &'static str, reason: String },

    #[error("invalid contract: {field} {reason}")]
    InvalidContract { field: &'static str, reason: String },

    #[error("non-finite sample {value} at grid index ({i}, {j})")]
    NonFiniteSample { i: usize, j: usize, value: f64 },

    #[error("grid mismatch: operands live on different grids")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("gauge exponential overflows: max |omega*theta| = {max_abs_exponent}")]
    GaugeOverflow { max_abs_exponent: f64 },

    #[error("operator is not diagonal with non-zero entries; cannot invert")]
    NotInvertibleDiagonal,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("linear solve failed at step {step}: {reason}")]
    Solve { step: usize, reason: String },

    #[error("query point ({x}, {y}) lies outside the grid box")]
    OutOfBox { x: f64, y: f64 },

    #[error("second option insensitive to volatility: hedge undefined")]
    HedgeUndefined,

    #[error("risk-neutral pricing requires phi = r (ensemble drift {drift}, rate {rate})")]
    DriftMismatch { drift: f64, rate: f64 },

    #[error("malformed path dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
