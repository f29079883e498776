use thiserror::Error;

use crate::lp::LpStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("row {row} of the matrix sums to {sum}, which exceeds 1")]
    NotSubstochastic { row: usize, sum: f64 },

    #[error("matrix entry ({row}, {col}) is negative: {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("node {node} has negative equity {value}; the payments are not a clearing vector")]
    NegativeEquity { node: usize, value: f64 },

    #[error("linear program terminated with status {0:?}")]
    Lp(LpStatus),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("network has {n} nodes; exhaustive enumeration supports at most {max}")]
    TooLarge { n: usize, max: usize },

    #[error("network does not have the required shape: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{failed} of {trials} trials failed (first: {first})")]
    TooManyFailures {
        failed: usize,
        trials: usize,
        first: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Lp(_) | Error::Numerical(_) | Error::TooManyFailures { .. }
        )
    }
}
