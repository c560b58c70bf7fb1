use thiserror::Error;

use crate::solver::{QrePoint, SolverTrace};

/// Which player's inner logit fit failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Straight,
    Turning,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Straight => f.write_str("straight-going"),
            Side::Turning => f.write_str("right-turning"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    Domain { field: &'static str, reason: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("fixed point not reached after {} rounds", .trace.rounds)]
    NonConvergence { trace: Box<SolverTrace> },

    #[error("perfect separation in the {side} logit (coefficient norm diverged)")]
    Separation { side: Side },

    #[error("inner logit fit for the {side} player did not converge: {reason}")]
    InnerFit { side: Side, reason: String },

    #[error("estimation did not converge after {} outer rounds", .trace.len())]
    OuterNonConvergence { trace: Vec<QrePoint> },

    #[error("all {requested} bootstrap replicates failed")]
    BootstrapFailed { requested: usize },

    #[error("synthetic observation {index} did not reach equilibrium after {attempts} draws")]
    Resample { index: usize, attempts: usize },

    #[error("calibration: {0}")]
    Calibration(String),

    #[error("point maps to infinity (homogeneous coordinate {0:e})")]
    PointAtInfinity(f64),

    #[error("pipeline: {0}")]
    Pipeline(String),

    #[error("{path}:{line}: {reason}")]
    Schema {
        path: String,
        line: u64,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Rejects non-finite values, naming the field.
pub(crate) fn finite(field: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::domain(field, format!("{value} is not finite")))
    }
}

/// Rejects values outside `[0, 1]`.
pub(crate) fn probability(field: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::domain(
            field,
            format!("{value} is not a probability"),
        ))
    }
}
