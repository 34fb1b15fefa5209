//! Completion of boundary data for the Laplacian on a rectangle.
//!
//! Both Dirichlet and Neumann data are known on the left edge, nothing on the
//! right one. Eliminating the interior of two well-posed problems, one with
//! each left condition, leaves `(S_D − S_N) u_R = b_D` on the right trace,
//! a compact and severely ill-conditioned system used to compare truncated
//! spectral solves, direct Tikhonov and preconditioned conjugate gradients.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod case;
pub mod compare;
pub mod fem;

pub use case::{add_noise, analytic_trace, assemble_case, CauchyCase, SteklovPair};
pub use compare::{run_comparison, Comparison, Method, Preconditioner, Regularizer};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] regkrylov::Error),
    #[error("invalid case: {0}")]
    InvalidCase(String),
    #[error("interior block not positive definite at pivot {pivot} (value {value:e})")]
    SingularInterior { pivot: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
