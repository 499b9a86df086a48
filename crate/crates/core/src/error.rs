use thiserror::Error;

pub type Result<T> = std::result::Result<T, HopfError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HopfError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An integral that the operation needs is infinite (e.g. non-Dini modulus).
    #[error("divergence: {0}")]
    Divergence(String),

    #[error("unsupported drift family: {0}")]
    UnsupportedFamily(String),

    /// A descriptor or coefficient field violates one of its invariants.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("linear solver stopped after {iterations} iterations with relative residual {residual:e}")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("quadrature did not reach tolerance: estimate {estimate:e}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// Non-finite or out-of-range values produced by a solve.
    #[error("numerical breakdown: {0}")]
    Breakdown(String),
}

impl HopfError {
    /// True for errors caused by invalid inputs rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HopfError::Domain(_)
                | HopfError::Divergence(_)
                | HopfError::UnsupportedFamily(_)
                | HopfError::InvariantViolation(_)
                | HopfError::Geometry(_)
                | HopfError::ResourceLimit(_)
        )
    }
}
