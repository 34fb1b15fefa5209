use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite: pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("zero operator: the largest eigenvalue is {0:e}")]
    ZeroOperator(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("zero step length at iteration {0}")]
    ZeroStep(usize),

    #[error("the solve trace did not retain its {0} vectors")]
    MissingStore(&'static str),

    #[error("non-positive Ritz value {value:e} at index {index}")]
    NonPositiveRitz { index: usize, value: f64 },

    #[error("shifted Ritz value vanishes at index {index} for lambda {lambda:e}")]
    SingularShift { index: usize, lambda: f64 },

    #[error("augmentation Gram matrix is singular; dependent columns {columns:?}")]
    DependentColumns { columns: Vec<usize> },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
