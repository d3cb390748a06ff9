use thiserror::Error;

use crate::order_stats::{BoundReport, ReductionReport};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is not a prime power")]
    NotPrimePower(u64),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("{what} of size {size} exceeds the enumeration limit {limit}")]
    DomainTooLarge {
        what: &'static str,
        size: u64,
        limit: u64,
    },
    #[error("operation requires an explicitly enumerated family")]
    ImplicitFamily,
    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("bound violated: {0}")]
    BoundViolation(Box<BoundReport>),
    #[error("reduction bound violated: {0}")]
    ReductionViolation(Box<ReductionReport>),
    #[error("quantile function has zero integral")]
    DegenerateQuantile,
    #[error("point is outside the unit ball: modular sum {0} > 1")]
    NotInBall(f64),
    #[error("sign-vector budget exceeded: needed more than {cap} vectors")]
    BudgetExceeded { cap: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
