use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("invalid synapse {index}: {reason}")]
    InvalidSynapse { index: usize, reason: &'static str },

    #[error("calibration sample has {got} entries, at least {min} required")]
    SampleTooSmall { got: usize, min: usize },

    #[error("degenerate {component} distribution: quantile edges are not strictly increasing")]
    DegenerateDistribution { component: &'static str },

    #[error("score undefined: ground truth has zero variance on the evaluation window")]
    ZeroVariance,

    #[error("window {start}..{end} is empty or exceeds trace length {len}")]
    BadWindow { start: usize, end: usize, len: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty training data")]
    EmptyData,
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam { field, reason: reason.into() }
    }
}
