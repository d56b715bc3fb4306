use thiserror::Error;

use crate::dyadic::DyadicInterval;

#[derive(Debug, Error)]
pub enum Error {
    #[error("interval {interval} is deeper than the signal depth {depth}")]
    DepthMismatch {
        interval: DyadicInterval,
        depth: u32,
    },

    #[error("signals have different depths ({0} vs {1})")]
    SignalDepths(u32, u32),

    #[error("signal length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Haar multiplier coefficient {value} at {interval} exceeds 1 in absolute value")]
    CoefficientBound {
        interval: DyadicInterval,
        value: f64,
    },

    #[error("interval {interval} carries no Haar mode at depth {depth}")]
    NoHaarMode {
        interval: DyadicInterval,
        depth: u32,
    },

    #[error("weight must be strictly positive and finite (cell {cell} has {value})")]
    NonPositiveWeight { cell: usize, value: f64 },

    #[error("empty interval family")]
    EmptyFamily,

    #[error("stopping time failed its sparsity check after {retries} retries (last C = {last_c})")]
    SparsityNotReached { retries: u32, last_c: f64 },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
