use thiserror::Error;

/// Errors raised by model construction, schedule assembly and propagation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{quantity} must be positive, got {value}")]
    NonPositive { quantity: &'static str, value: f64 },

    #[error("level index {index} outside 0..={max}")]
    LevelOutOfRange { index: usize, max: usize },

    #[error("singular input: {0}")]
    Singular(&'static str),

    #[error("probability threshold {0} outside (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("integration failed at t = {time:e} s after {steps} steps: {reason}")]
    Integration {
        time: f64,
        steps: usize,
        norm: f64,
        reason: String,
    },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("unknown parameter `{name}` for protocol `{protocol}`")]
    UnknownParameter { protocol: &'static str, name: String },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("optimizer: {0}")]
    Optimizer(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(quantity: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonPositive { quantity, value })
    }
}
