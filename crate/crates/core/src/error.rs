use num_complex::Complex64;
use thiserror::Error;

use crate::saddle::NewtonStep;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("evaluation point {z} coincides with a pole or branch point")]
    Pole { z: Complex64 },

    #[error("saddle search failed for k={k}, seed={seed}: {reason}")]
    SaddleFailure {
        k: u32,
        seed: u64,
        reason: String,
        trace: Vec<NewtonStep>,
    },

    #[error("|x| = {x} exceeds the radius where the truncated Taylor series is reliable (tail estimate {tail:e})")]
    WindowTooLarge { x: f64, tail: f64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LabError::InvalidParameter(msg.into())
    }
}
