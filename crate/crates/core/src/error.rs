use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("Hurst parameter {0} outside the admissible range (1/2, 1)")]
    InvalidHurst(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("vector field system provides derivatives up to order {available}, {required} required")]
    InsufficientDerivatives { required: usize, available: usize },

    #[error("non-finite state at grid step {step}")]
    NonFinite { step: usize },

    #[error("exponent {0} is not an element of the lattice")]
    NotInLattice(f64),

    #[error("degenerate sample: zero variance in component {component}")]
    DegenerateBandwidth { component: usize },

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("diffusion is degenerate: min eigenvalue of sigma sigma^T is {min_eigenvalue:e}")]
    DegenerateDiffusion { min_eigenvalue: f64 },

    #[error("scale {0} is not aligned with the grid")]
    Misaligned(f64),

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::GridMismatch(msg.into())
    }
}
