use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while fitting, calibrating or running experiments.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no calibration scores")]
    NoCalibrationScores,

    #[error("invalid interval: lo {lo} > hi {hi}")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no out-of-bag trees")]
    NoOutOfBagTrees,

    #[error("index never out-of-bag: training point {0} appears in every bag")]
    NeverOutOfBag(usize),

    #[error("fold sizes must be equal: n = {n} is not divisible by K = {k}")]
    UnequalFolds { n: usize, k: usize },

    #[error("degenerate resample: draw {0} leaves no calibration points")]
    DegenerateResample(usize),

    #[error("binomial draw produced K = 0 trees")]
    ZeroTrees,

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, line {line}: {reason}")]
    Parse {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
