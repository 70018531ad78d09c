use thiserror::Error;

/// Errors produced by model construction and the bound/sampler operations.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter violates its domain (non-positive variance, r2 outside [0,1], ...).
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Two inputs that must share a dimension do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A matrix that must be symmetric positive definite is not.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// An input contains NaN or infinite entries.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// The data are too degenerate for the requested operation.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The requested confounding strength is below the minimum implied by the
    /// negative controls. Carries that minimum.
    #[error("infeasible confounding strength: r2 must be at least {r2_min}")]
    Infeasible { r2_min: f64 },

    /// Negative-control effects are not in the row space of the constraint matrix.
    #[error(
        "negative controls incompatible with the factor model (residual norm {residual_norm})"
    )]
    Incompatible { residual_norm: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
