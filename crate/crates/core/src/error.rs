use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value at point {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("sign of sigma(x) - x unresolved on [{lo}, {hi}]")]
    Inconclusive { lo: f64, hi: f64 },

    #[error("value {y} lies outside the range of the activation")]
    OutOfRange { y: f64 },

    #[error("least-squares system is singular; use ridge > 0")]
    Singular,

    #[error("no escape within {max_n} iterations")]
    NoEscape { max_n: usize },

    #[error("{what}: measured {measured} does not meet bound {bound}")]
    Verification { what: String, measured: f64, bound: f64 },

    #[error("fit residual {residual} exceeds budget {budget}")]
    FitBudget { residual: f64, budget: f64 },

    #[error("function does not fall below {threshold} within radius {max_radius}")]
    TailSearch { threshold: f64, max_radius: f64 },

    #[error("no weight in the family controls the function (divergence flags {flags:?})")]
    NoControllingWeight { flags: Vec<(String, bool)> },

    #[error("constraint `{label}` violated: {value} is not below {threshold}")]
    Constraint { label: String, value: f64, threshold: f64 },

    #[error("pushforward density is unbounded")]
    UnboundedPushforward,

    #[error("operator norm {norm} <= 1 contradicts geometric growth")]
    NoGrowth { norm: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn pre(reason: impl Into<String>) -> Self {
        Error::Precondition(reason.into())
    }
}
