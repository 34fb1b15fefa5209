//! Regularized Krylov solvers.
//!
//! A preconditioned conjugate gradient in which the Tikhonov regularizer `M`
//! of `(A + λM) x = b_A + λ b_M` is also the preconditioner. Because the
//! Lanczos basis produced by the solve is `M`-orthonormal, the Ritz pairs
//! extracted after the fact diagonalize `A + λM` for every `λ` at once, which
//! gives a-posteriori filtering, L-curves and Picard plots, and approximate
//! solutions for other regularization weights at negligible cost.
//!
//! Module map:
//!
//! - [`linalg`] and [`operator`]: dense substrate (Cholesky, cyclic Jacobi,
//!   generalized eigenproblems, truncated spectral solve) and the
//!   [`LinearMap`] abstraction.
//! - [`pcg`]: the (optionally projected) preconditioned conjugate gradient
//!   with its costless norm recurrences and stopping criteria.
//! - [`ritz`]: tridiagonal assembly, Ritz extraction and diagnostics.
//! - [`augmentation`]: augmented initialization, the oblique projector and
//!   Ritz recycling.
//! - [`tikhonov`]: regularized solves, λ sweeps and the multi-λ outer driver.
//! - [`csv`]: the fixed-precision CSV format shared by every export.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
pub mod augmentation;
pub mod csv;
mod error;
pub mod linalg;
pub mod operator;
pub mod pcg;
pub mod ritz;
pub mod tikhonov;

pub use error::{Error, Result};
pub use operator::{LinearMap, MapKind};

#[cfg(test)]
mod testutil;
