use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// A structural consistency check failed (e.g. a kernel that is not
    /// self-similar was passed where self-similarity is required).
    #[error("inconsistency: {0}")]
    Inconsistency(String),

    /// A matrix factorization or quadrature could not be completed.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    /// A local expansion does not fit the kernel within tolerance.
    #[error("expansion not applicable: {0}")]
    ExpansionNotApplicable(String),

    /// Mismatched shapes (grids, row counts) between ensembles or paths.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An operation is not supported for the given inputs.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A ratio such as the excess integral is undefined (zero denominator).
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    /// Estimation failed (e.g. non-positive slope for the derivative fit).
    #[error("estimation failure: {0}")]
    EstimationFailure(String),

    /// The adaptive horizon for the limit-cluster simulation did not settle.
    #[error("horizon growth did not converge: {0}")]
    Horizon(String),

    /// A requested Monte-Carlo budget exceeds the configured memory bound.
    #[error("resource bound exceeded: {0}")]
    Resource(String),

    /// Incomplete or contradictory experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),
}

impl CoreError {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        CoreError::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
