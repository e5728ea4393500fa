use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),
    #[error("algebra mismatch between operands")]
    AlgebraMismatch,
    #[error("invalid tolerance profile: {0}")]
    InvalidTolerance(String),
    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eig:.3e})")]
    NotPositive { min_eig: f64 },
    #[error("eigen/singular value solver did not converge")]
    NoConvergence,
    #[error("ambiguous rank decision: smallest retained singular value {smallest:.3e} within guard band of cutoff {cutoff:.3e}")]
    NotPartiallyInvertible { smallest: f64, cutoff: f64 },
    #[error("not a projection (residual {residual:.3e})")]
    NotProjection { residual: f64 },
    #[error("not a partial isometry (residual {residual:.3e})")]
    NotPartialIsometry { residual: f64 },
    #[error("arrows are not composable (mismatch {mismatch:.3e})")]
    NotComposable { mismatch: f64 },
    #[error("invalid arrow: {0}")]
    InvalidArrow(String),
    #[error("support mismatch (residual {residual:.3e})")]
    SupportMismatch { residual: f64 },
    #[error("projection outside the chart domain")]
    NotInDomain,
    #[error("point outside the chart overlap")]
    NotInOverlap,
    #[error("invalid tangent vector: {0}")]
    InvalidTangent(String),
    #[error("density is not faithful on the requested support")]
    NotFaithful,
    #[error("degenerate base point (zero vector)")]
    DegenerateBase,
    #[error("vector is not a unit vector (norm {norm:.6})")]
    NotUnitVector { norm: f64 },
    #[error("trial count must be at least 1")]
    InvalidTrials,
    #[error("invalid composable family: {0}")]
    InvalidFamily(String),
    #[error("unknown suite '{0}'")]
    UnknownSuite(String),
    #[error("observable differential is not Hermitian (residual {residual:.3e})")]
    NotHermitianDifferential { residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
