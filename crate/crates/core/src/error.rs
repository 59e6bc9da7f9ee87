use std::collections::BTreeMap;

use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix dimension {requested} exceeds the configured cap {cap}")]
    Capacity { requested: u128, cap: usize },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid {kind}: {violation}")]
    Invalid { kind: &'static str, violation: String },

    #[error("branch probability {probability:e} is too small to condition on")]
    DegenerateBranch { probability: f64 },

    #[error("postselection probability {probability:e} is too small to condition on")]
    DegeneratePostselection { probability: f64 },

    #[error("copy budget exhausted: requested {requested} with {consumed} of {budget} consumed")]
    BudgetExhausted {
        requested: u64,
        consumed: u64,
        budget: u64,
        attribution: BTreeMap<String, u64>,
    },

    #[error("iteration bound {bound} exceeded")]
    IterationBoundExceeded { bound: usize },

    #[error("rejection sampler gave up after {attempts} attempts")]
    RejectionLimit { attempts: usize },

    #[error("{operation} does not support fidelity mode {mode}")]
    ModeUnsupported { operation: &'static str, mode: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
