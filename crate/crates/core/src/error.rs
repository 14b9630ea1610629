use thiserror::Error;

pub type Result<T, E = OtError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum OtError {
    /// Input outside the documented parameter range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A query point lies outside the domain of the object it was asked of.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver stopped before reaching its tolerance.
    #[error("{solver} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    /// A computed quantity violates a structural property (convexity, monotonicity, ...).
    #[error("diagnostic: {0}")]
    Diagnostic(String),
}

impl OtError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        OtError::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        OtError::Domain(msg.into())
    }

    pub(crate) fn diagnostic(msg: impl Into<String>) -> Self {
        OtError::Diagnostic(msg.into())
    }
}
