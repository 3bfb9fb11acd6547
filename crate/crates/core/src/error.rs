use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An instance failed validation. `invariant` names the violated rule.
    #[error("invalid instance: {invariant} ({detail})")]
    InvalidInstance {
        invariant: &'static str,
        detail: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("discount factor {alpha} does not exceed alpha* = {alpha_star}")]
    DiscountBelowThreshold { alpha: f64, alpha_star: f64 },

    /// Probability mass leaves the lattice through its lower end and the table
    /// has no valid linear extension there.
    #[error("truncation underflow: {0}")]
    TruncationUnderflow(String),

    /// A minimizer sits on the lattice boundary.
    #[error("lattice too tight: {0}")]
    TruncationTooTight(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("no convergence after {iterations} sweeps (last span of change {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("bounding box [{lower}, {upper}] does not contain discounted minimizer {argmin}")]
    BoundingBox { lower: f64, upper: f64, argmin: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidInstance {
            invariant,
            detail: detail.into(),
        }
    }
}
