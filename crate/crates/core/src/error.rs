use std::path::PathBuf;

use crate::lp::LpStatus;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("relay ordering violated: beta1*d = {left} exceeds d - beta2*d = {right}")]
    Ordering { left: f64, right: f64 },

    #[error("{n_relays} relays exceeds the cut enumeration limit of {limit}")]
    CutLimit { n_relays: usize, limit: usize },

    #[error("outside the approximation domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected} coefficients, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("simplex did not terminate within {0} iterations")]
    IterationLimit(usize),

    #[error("linear program was unexpectedly {0:?}")]
    Solver(LpStatus),

    #[error("inconsistent results: {0}")]
    Inconsistent(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json encoding failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
