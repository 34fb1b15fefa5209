//! Gauss–Newton iterations on one pyramid level and the coarse-to-fine driver.
//!
//! Each step solves `(A + λM) du = b_A + λ b_M` with `b_A = J (I_1 − I_2∘φ)`
//! and `b_M = −M u`, the Jacobian being approximated by the gradient of
//! `I_1` so that the matrix is the same for every step of a level.

use std::fmt;
use std::str::FromStr;

use log::{info, warn};
use regkrylov::augmentation::{recycle, AugmentationBasis, ColumnLabel};
use regkrylov::linalg::norm;
use regkrylov::operator::shifted_map;
use regkrylov::pcg::{Criteria, SolveConfig};
use regkrylov::ritz::RitzSet;
use regkrylov::tikhonov::{solve_regularized, NonlinearProblem, RegularizedSolve, TikhonovSystem};
use regkrylov::LinearMap;

use crate::image::{downsample, gradient, median_filter, upsample, warp, Image};
use crate::operators::{
    jacobi_inverse, kernel_basis_c0, FlowOperator, FlowRegularizer, LaplacianInverse,
};
use crate::{Error, Result};

/// Coarsest level kept by the automatic pyramid depth.
pub const AUTO_COARSEST: usize = 32;
/// Smallest side accepted for an explicitly requested level.
pub const MIN_LEVEL_SIDE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowPreconditioner {
    /// Pseudo-inverse of the regularizer by cosine transform.
    Regularization,
    /// `diag(A + λM)⁻¹`
    Jacobi,
}

impl fmt::Display for FlowPreconditioner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Regularization => "regularization",
            Self::Jacobi => "jacobi",
        })
    }
}

impl FromStr for FlowPreconditioner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regularization" | "dct" => Ok(Self::Regularization),
            "jacobi" | "diag" => Ok(Self::Jacobi),
            _ => Err(Error::Config(format!(
                "unknown preconditioner {s:?}, expected regularization or jacobi"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub lambda: f64,
    pub solve: SolveConfig,
    pub preconditioner: FlowPreconditioner,
    /// Odd width of the median filter applied to each increment.
    pub median_width: usize,
    pub outer_max: usize,
    /// Stop a level once `‖du‖ ≤ outer_tol ‖u‖`.
    pub outer_tol: f64,
    /// Pyramid depth; `None` halves until the smaller side would drop below
    /// [`AUTO_COARSEST`].
    pub levels: Option<usize>,
    /// Fraction of the Ritz vectors of each step carried into the basis of
    /// the next one on the same level; 0 disables recycling.
    pub recycle: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            lambda: 1000.0,
            solve: SolveConfig {
                eps: 1e-5,
                max_iter: 500,
                criteria: Criteria::MINRES_STYLE,
                ..Default::default()
            },
            preconditioner: FlowPreconditioner::Regularization,
            median_width: 3,
            outer_max: 20,
            outer_tol: 1e-3,
            levels: None,
            recycle: 0.0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.median_width.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "median width must be odd, got {}",
                self.median_width
            )));
        }
        if self.outer_max == 0 {
            return Err(Error::Config("outer_max must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.recycle) {
            return Err(Error::Config(format!(
                "recycle fraction must lie in [0, 1], got {}",
                self.recycle
            )));
        }
        if self.levels == Some(0) {
            return Err(Error::Config("levels must be at least 1".into()));
        }
        self.solve.validate()?;
        Ok(())
    }
}

/// A flow vector `(vec(u_x), vec(u_y))` split into its two images.
pub fn split_flow(like: &Image, x: &[f64]) -> (Image, Image) {
    let p = like.len();
    (
        like.with_values(x[..p].to_vec()),
        like.with_values(x[p..].to_vec()),
    )
}

pub fn join_flow(ux: &Image, uy: &Image) -> Vec<f64> {
    [ux.values(), uy.values()].concat()
}

/// Everything that stays fixed while iterating on one level.
#[derive(Clone, Debug)]
pub struct FlowLevel {
    pub i1: Image,
    pub i2: Image,
    pub jx: Image,
    pub jy: Image,
    pub a: FlowOperator,
    pub m: FlowRegularizer,
    pub m_inv: LaplacianInverse,
    pub c0: Vec<Vec<f64>>,
    pub(crate) median_width: usize,
}

/// Outcome of one Gauss–Newton step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    /// Increment after median filtering.
    pub du: Vec<f64>,
    pub solve: RegularizedSolve,
}

impl FlowLevel {
    pub fn new(i1: Image, i2: Image, median_width: usize) -> Result<Self> {
        if !i1.same_shape(&i2) {
            return Err(Error::Shape(format!(
                "image shapes differ: {}x{} vs {}x{}",
                i1.width(),
                i1.height(),
                i2.width(),
                i2.height()
            )));
        }
        let (jx, jy) = gradient(&i1);
        let c0 = kernel_basis_c0(&jx, &jy)?;
        let a = FlowOperator::new(&jx, &jy);
        let m = FlowRegularizer::new(i1.width(), i1.height());
        let m_inv = LaplacianInverse::new(i1.width(), i1.height())?;
        Ok(Self {
            i1,
            i2,
            jx,
            jy,
            a,
            m,
            m_inv,
            c0,
            median_width,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.i1.len()
    }

    /// `C_0` as an augmentation basis for `A + λM`.
    pub fn kernel_basis(&self, lambda: f64) -> Result<AugmentationBasis> {
        let a_l = shifted_map(&self.a, &self.m, lambda)?;
        Ok(AugmentationBasis::new(
            &a_l,
            self.c0.clone(),
            vec![ColumnLabel::Kernel; self.c0.len()],
        )?)
    }

    /// Image residual `I_1 − I_2 ∘ (id + u)`.
    pub fn image_residual(&self, u: &[f64]) -> Image {
        let (ux, uy) = split_flow(&self.i1, u);
        let warped = warp(&self.i2, &ux, &uy);
        self.i1.with_values(
            self.i1
                .values()
                .iter()
                .zip(warped.values())
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// `(b_A, b_M)` at the flow `u`.
    pub fn rhs(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let res = self.image_residual(u);
        let b_a: Vec<f64> = self
            .jx
            .values()
            .iter()
            .zip(res.values())
            .map(|(j, r)| j * r)
            .chain(
                self.jy
                    .values()
                    .iter()
                    .zip(res.values())
                    .map(|(j, r)| j * r),
            )
            .collect();
        let b_m: Vec<f64> = self.m.apply(u).into_iter().map(|v| -v).collect();
        (b_a, b_m)
    }

    /// `½‖I_1 − I_2∘φ‖² + ½ λ uᵀMu`
    pub fn energy(&self, u: &[f64], lambda: f64) -> f64 {
        let res = self.image_residual(u);
        let img: f64 = res.values().iter().map(|v| v * v).sum();
        let reg: f64 = u.iter().zip(self.m.apply(u)).map(|(a, b)| a * b).sum();
        0.5 * img + 0.5 * lambda * reg
    }

    pub fn filter_increment(&self, du: &[f64]) -> Result<Vec<f64>> {
        let (dx, dy) = split_flow(&self.i1, du);
        let fx = median_filter(&dx, self.median_width)?;
        let fy = median_filter(&dy, self.median_width)?;
        Ok(join_flow(&fx, &fy))
    }

    /// One linearized solve from `u` with the given augmentation basis.
    pub fn step(
        &self,
        u: &[f64],
        lambda: f64,
        solve: &SolveConfig,
        prec: FlowPreconditioner,
        basis: &AugmentationBasis,
        want_ritz: bool,
    ) -> Result<StepOutcome> {
        let (b_a, b_m) = self.rhs(u);
        let sys = TikhonovSystem::new(&self.a, &self.m, b_a, b_m, lambda)?;
        let zero = vec![0.0; self.dim()];
        let solved = match prec {
            FlowPreconditioner::Regularization => {
                solve_regularized(&sys, &self.m_inv, &zero, solve, basis, want_ritz)?
            }
            FlowPreconditioner::Jacobi => {
                let d = jacobi_inverse(&self.a, &self.m, lambda)?;
                solve_regularized(&sys, &d, &zero, solve, basis, want_ritz)?
            }
        };
        let du = self.filter_increment(&solved.result.x)?;
        Ok(StepOutcome { du, solve: solved })
    }
}

/// Gauss–Newton step as called by [`gn_step`].
pub fn gn_step(
    level: &FlowLevel,
    u: &[f64],
    cfg: &FlowConfig,
    basis: &AugmentationBasis,
    want_ritz: bool,
) -> Result<StepOutcome> {
    level.step(
        u,
        cfg.lambda,
        &cfg.solve,
        cfg.preconditioner,
        basis,
        want_ritz,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelReport {
    pub width: usize,
    pub height: usize,
    pub outer: usize,
    pub inner: Vec<usize>,
    pub converged: bool,
}

/// Halvings of an increment that fails to lower the energy before the
/// level is declared stalled.
pub const MAX_HALVINGS: usize = 4;

/// Gauss–Newton loop on one level from the flow `u`.
///
/// The Jacobian is frozen at `∇I_1`, so a full step can overshoot where the
/// texture is weak; increments that raise the energy are halved.
pub fn solve_level(
    level: &FlowLevel,
    mut u: Vec<f64>,
    cfg: &FlowConfig,
) -> Result<(Vec<f64>, LevelReport)> {
    let kernel = level.kernel_basis(cfg.lambda)?;
    let mut basis = kernel.clone();
    let recycling = cfg.recycle > 0.0;
    let mut report = LevelReport {
        width: level.i1.width(),
        height: level.i1.height(),
        outer: 0,
        inner: Vec::new(),
        converged: false,
    };
    let mut energy = level.energy(&u, cfg.lambda);
    for _ in 0..cfg.outer_max {
        let step = gn_step(level, &u, cfg, &basis, recycling)?;
        report.inner.push(step.solve.result.trace.m());
        report.outer += 1;
        if let (Some(ritz), Some(av)) = (&step.solve.ritz, &step.solve.av) {
            let keep = (cfg.recycle * ritz.len() as f64).ceil() as usize;
            basis = recycle(&kernel, ritz, av, keep).unwrap_or_else(|e| {
                warn!("recycling failed, keeping the constant-flow basis: {e}");
                kernel.clone()
            });
        }
        let mut du = step.du;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, d)| a + d).collect();
            let e = level.energy(&trial, cfg.lambda);
            if e < energy {
                accepted = Some((trial, e));
                break;
            }
            du.iter_mut().for_each(|d| *d *= 0.5);
        }
        let Some((next, e)) = accepted else {
            info!(
                "level {}x{}: no decrease along the increment, stopping",
                report.width, report.height
            );
            report.converged = true;
            break;
        };
        u = next;
        energy = e;
        let (nd, nu) = (norm(&du), norm(&u));
        if nd <= cfg.outer_tol * nu || nd == 0.0 {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        warn!(
            "level {}x{}: no convergence after {} outer iterations",
            report.width, report.height, report.outer
        );
    }
    Ok((u, report))
}

/// Pyramid depth for an image, honouring a request when it fits.
pub fn pyramid_depth(width: usize, height: usize, requested: Option<usize>) -> usize {
    let side = width.min(height);
    let fits = |levels: usize, min_side: usize| side >> (levels - 1) >= min_side;
    match requested {
        None => {
            let mut l = 1;
            while fits(l + 1, AUTO_COARSEST) {
                l += 1;
            }
            l
        }
        Some(r) => {
            let mut l = r.max(1);
            while l > 1 && !fits(l, MIN_LEVEL_SIDE) {
                l -= 1;
            }
            if l < r {
                warn!("{width}x{height} image supports {l} pyramid levels, not {r}");
            }
            l
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    pub ux: Image,
    pub uy: Image,
    /// Coarsest first.
    pub levels: Vec<LevelReport>,
}

/// Solves every pyramid level but the finest and returns the finest level
/// with its starting flow.
pub fn coarse_to_fine(
    i1: &Image,
    i2: &Image,
    cfg: &FlowConfig,
) -> Result<(FlowLevel, Vec<f64>, Vec<LevelReport>)> {
    cfg.validate()?;
    if !i1.same_shape(i2) {
        return Err(Error::Shape("image shapes differ".into()));
    }
    let depth = pyramid_depth(i1.width(), i1.height(), cfg.levels);
    let mut pyramid = vec![(i1.clone(), i2.clone())];
    for _ in 1..depth {
        let (a, b) = pyramid.last().expect("non-empty");
        pyramid.push((downsample(a)?, downsample(b)?));
    }
    let mut flow: Option<(Image, Image)> = None;
    let mut reports = Vec::new();
    let last = pyramid.len() - 1;
    for (k, (a, b)) in pyramid.into_iter().rev().enumerate() {
        let (w, h) = (a.width(), a.height());
        let u0 = match &flow {
            None => vec![0.0; 2 * w * h],
            Some((fx, fy)) => join_flow(&upsample(fx, w, h, 2.0), &upsample(fy, w, h, 2.0)),
        };
        let level = FlowLevel::new(a, b, cfg.median_width)?;
        if k == last {
            return Ok((level, u0, reports));
        }
        let (u, report) = solve_level(&level, u0, cfg)?;
        info!(
            "level {w}x{h}: {} outer iterations, inner {:?}",
            report.outer, report.inner
        );
        reports.push(report);
        flow = Some(split_flow(&level.i1, &u));
    }
    unreachable!("the pyramid has at least one level")
}

/// Coarse-to-fine flow from `i1` to `i2`.
pub fn pyramid_solve(i1: &Image, i2: &Image, cfg: &FlowConfig) -> Result<FlowResult> {
    let (level, u0, mut reports) = coarse_to_fine(i1, i2, cfg)?;
    let (u, report) = solve_level(&level, u0, cfg)?;
    info!(
        "level {}x{}: {} outer iterations, inner {:?}",
        report.width, report.height, report.outer, report.inner
    );
    reports.push(report);
    let (ux, uy) = split_flow(&level.i1, &u);
    Ok(FlowResult {
        ux,
        uy,
        levels: reports,
    })
}

/// Ritz pairs of the linearized system at `u`, for L-curve and Picard
/// diagnostics; the increment itself is discarded.
pub fn ritz_at(level: &FlowLevel, u: &[f64], cfg: &FlowConfig) -> Result<RitzSet> {
    let basis = level.kernel_basis(cfg.lambda)?;
    let solve = SolveConfig {
        reorthogonalize: true,
        ..cfg.solve.clone()
    };
    let out = level.step(u, cfg.lambda, &solve, cfg.preconditioner, &basis, true)?;
    Ok(out.solve.ritz.unwrap_or_else(|| RitzSet {
        theta: Vec::new(),
        shift: cfg.lambda,
        vectors: Vec::new(),
        r_a: Vec::new(),
        r_m: Vec::new(),
        m: 0,
        valid: 0,
    }))
}

impl NonlinearProblem for FlowLevel {
    type State = Vec<f64>;

    fn operator(&self) -> &dyn LinearMap {
        &self.a
    }

    fn regularizer(&self) -> &dyn LinearMap {
        &self.m
    }

    fn regularizer_inverse(&self) -> &dyn LinearMap {
        &self.m_inv
    }

    fn kernel_basis(&self) -> Vec<Vec<f64>> {
        self.c0.clone()
    }

    fn rhs(&self, state: &Vec<f64>) -> (Vec<f64>, Vec<f64>) {
        FlowLevel::rhs(self, state)
    }

    fn update(&self, state: &Vec<f64>, delta: &[f64]) -> Vec<f64> {
        // the width was validated when the level was built
        let d = self.filter_increment(delta).expect("odd median width");
        state.iter().zip(&d).map(|(a, b)| a + b).collect()
    }
}
