use thiserror::Error;

/// Errors raised by model arithmetic, the embedded solvers and the two stages.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("problem is unbounded: {0}")]
    Unbounded(String),

    #[error("capacity purchase is unbounded at price {0}")]
    UnboundedCapacity(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The price sits on a threshold; any capacity in the bracket is optimal there.
    #[error("price {price} coincides with a threshold; bracketing interval ({lower}, {upper})")]
    AmbiguousPrice { price: f64, lower: f64, upper: f64 },

    #[error("no price yields nonnegative aggregator profit")]
    NoViablePrice,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
