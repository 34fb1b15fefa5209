//! Regularized optical flow by Gauss–Newton with Krylov inner solves.
//!
//! The flow `u` between two gray-level frames minimizes the image mismatch
//! plus `λ` times the Dirichlet energy of each component. Each linearized
//! step is solved by the preconditioned conjugate gradient of [`regkrylov`]
//! with the Neumann Laplacian as regularizer, its cosine-transform
//! pseudo-inverse as preconditioner, and the constant flows as augmentation.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dct;
pub mod gn;
pub mod image;
pub mod operators;
pub mod recycle;
pub mod synth;

pub use gn::{pyramid_solve, FlowConfig, FlowLevel, FlowPreconditioner, FlowResult};
pub use image::Image;
pub use operators::{kernel_basis_c0, FlowOperator, FlowRegularizer, LaplacianInverse};
pub use synth::Speckle;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] regkrylov::Error),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(
        "image gradients are too weak or collinear for the constant-flow basis \
         (sxx={sxx:e}, syy={syy:e}, sxy={sxy:e}); use the raw constant fields instead"
    )]
    Textureless { sxx: f64, syy: f64, sxy: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
