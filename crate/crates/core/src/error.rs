use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("vector is not unit length (norm {norm})")]
    NonUnitVector { norm: f64 },
    #[error("Neumann series diverges: operator norm {norm} >= L = {l}")]
    Divergent { norm: f64, l: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("no fittable rows (need successes >= {min_successes} and p_hat > 0)")]
    NoFittableRows { min_successes: u64 },
    #[error("budget exceeded: {what} needs {needed}, limit {limit}")]
    BudgetExceeded { what: &'static str, needed: f64, limit: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
