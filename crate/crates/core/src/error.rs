use thiserror::Error;

use crate::flow::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Parameters are individually valid but do not fit together.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// Input data violates a precondition (zero rows, wrong labels, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("rejection sampling failed after {tries} tries (best lambda_hat = {best_lambda})")]
    SamplingFailure { tries: usize, best_lambda: f64 },

    #[error("degenerate: {0}")]
    Degenerate(String),

    /// Integration produced a non-finite value. `partial` holds every record
    /// written before the blow-up.
    #[error("integration diverged at t = {time}")]
    Divergence { time: f64, partial: Box<Trajectory> },

    #[error("bound not applicable: {0}")]
    Inapplicable(String),

    #[error("ordering violated: {0}")]
    Ordering(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
