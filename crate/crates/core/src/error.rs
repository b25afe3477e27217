//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty stream")]
    EmptyStream,

    #[error("non-finite value in sample {index}")]
    NonFiniteSample { index: usize },

    #[error("timestamps not strictly increasing at index {index}")]
    NonMonotonicTime { index: usize },

    #[error("rotation axis is not a unit vector (norm {norm})")]
    NotUnitAxis { norm: f64 },

    #[error("degenerate lever arm: |r| = {r_norm} m is below the minimum {r_min} m")]
    DegenerateLeverArm { r_norm: f64, r_min: f64 },

    #[error("assumption 5 violated: multiple gyro axes saturated simultaneously")]
    MultiAxisSaturation,

    #[error("no prior rotation axis for window starting at sample {index}")]
    NoPriorAxis { index: usize },

    #[error("need at least 2 estimates to smooth, got {got}")]
    TooFewEstimates { got: usize },

    #[error("extrapolation not supported: t = {t} outside [{start}, {end}]")]
    Extrapolation { t: f64, start: f64, end: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("no overlapping time span between truth and estimates")]
    EmptyOverlap,

    #[error("no saturated samples to evaluate")]
    NoSaturatedSamples,

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
