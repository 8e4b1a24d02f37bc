use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A column of the raw sample contains tied values and ties are not allowed.
    /// `column` is 1-based.
    #[error("tied values present in column {column}")]
    TiesPresent { column: usize },

    /// The sample size is not a multiple of the partition order.
    #[error("sample size {n} is not divisible by {divisor}")]
    Divisibility { n: usize, divisor: usize },

    #[error("evaluator `{name}` is not a copula: {reason}")]
    NotACopula { name: String, reason: String },

    #[error("invalid subcopula grid: {0}")]
    InvalidSubcopula(String),

    #[error("invalid piecewise density: {0}")]
    InvalidDensity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cache error: {0}")]
    Cache(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
