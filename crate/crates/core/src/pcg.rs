//! Preconditioned conjugate gradient with optional projection.
//!
//! Every scalar the iteration produces is kept in a [`SolveTrace`] together
//! with the quantities that follow from them at no extra operator cost:
//! the `M⁻¹`-norm of the residual, the `M`-norm of the correction
//! `x_i − x_0`, the Frobenius norm of the Lanczos tridiagonal matrix and the
//! energy decrement of each step.

use std::io::Write;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::csv::{fmt_f64, Table};
use crate::linalg::{axpy, check_dim, dot};
use crate::operator::LinearMap;
use crate::{Error, Result};

/// `γ` or `δ` at or below this value is treated as an exact zero.
pub const BREAKDOWN_TOLERANCE: f64 = 1e-300;

/// A negative `γ_{i+1}` smaller than this fraction of `γ_0` is round-off
/// around an exact zero, not an indefinite preconditioner.
pub const ROUNDOFF_GAMMA: f64 = f64::EPSILON * f64::EPSILON;

/// Oblique projection applied to the preconditioned residual.
pub trait Projector {
    fn dim(&self) -> usize;

    /// `P v`
    fn project(&self, v: &[f64]) -> Vec<f64>;

    /// `Pᵀ r`, used to scrub drift from the residual.
    fn project_residual(&self, r: &[f64]) -> Vec<f64>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Criteria {
    /// `‖r_i‖_{M⁻¹} < ε ‖r_0‖_{M⁻¹}`
    pub residual_ratio: bool,
    /// `‖r_i‖_{M⁻¹} < ε ‖T_i‖_F ‖x_i − x_0‖_M`
    pub minres_style: bool,
    /// `γ_i² / δ_i < ε²` over a window of consecutive steps.
    pub stagnation: bool,
}

impl Criteria {
    pub const RESIDUAL_RATIO: Self = Self {
        residual_ratio: true,
        minres_style: false,
        stagnation: false,
    };
    pub const MINRES_STYLE: Self = Self {
        residual_ratio: false,
        minres_style: true,
        stagnation: false,
    };
    pub const STAGNATION: Self = Self {
        residual_ratio: false,
        minres_style: false,
        stagnation: true,
    };

    pub fn any(&self) -> bool {
        self.residual_ratio || self.minres_style || self.stagnation
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub eps: f64,
    pub max_iter: usize,
    pub criteria: Criteria,
    pub stagnation_window: usize,
    /// Stop as soon as `‖r_i‖_{M⁻¹}` drops below this value, whatever the
    /// selected criteria. Zero disables the floor.
    pub abs_floor: f64,
    /// Keep `z_i`, `q_i` and `w_i` for Ritz extraction.
    pub store_vectors: bool,
    /// Gram-Schmidt of each new `z` against all previous ones in the `M`
    /// inner product. Implies `store_vectors`.
    pub reorthogonalize: bool,
    /// Period of the `r ← Pᵀ r` clean-up when a projector is used; 0 disables it.
    pub reproject_every: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            eps: 1e-8,
            max_iter: 1000,
            criteria: Criteria::RESIDUAL_RATIO,
            stagnation_window: 3,
            abs_floor: 0.0,
            store_vectors: false,
            reorthogonalize: false,
            reproject_every: 50,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        if !self.criteria.any() && !(self.abs_floor > 0.0) {
            return Err(Error::InvalidConfig(
                "at least one stopping criterion or abs_floor must be enabled".into(),
            ));
        }
        if self.stagnation_window == 0 {
            return Err(Error::InvalidConfig(
                "stagnation_window must be positive".into(),
            ));
        }
        if !(self.abs_floor >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "abs_floor must be >= 0, got {}",
                self.abs_floor
            )));
        }
        Ok(())
    }
}

/// Scalars of step `i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub alpha: f64,
    /// `γ_{i+1} / γ_i`
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// `‖x_{i+1} − x_0‖²_M`
    pub corr_mnorm_sq: f64,
    /// `‖T_{i+1}‖²_F`
    pub t_frob_sq: f64,
    /// `γ_i² / δ_i`
    pub energy_decrement: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BreakdownKind {
    /// `δ_i = wᵀ A w` vanished or went negative; the step was not taken.
    Curvature,
    /// `γ_{i+1} = zᵀ r` went negative; the step was kept.
    Preconditioner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    ResidualRatio,
    MinresStyle,
    Stagnation,
    AbsoluteFloor,
    MaxIter,
    Breakdown(BreakdownKind),
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::ResidualRatio => "residual-ratio",
            StopReason::MinresStyle => "minres-style",
            StopReason::Stagnation => "stagnation",
            StopReason::AbsoluteFloor => "absolute-floor",
            StopReason::MaxIter => "max-iter",
            StopReason::Breakdown(BreakdownKind::Curvature) => "breakdown-curvature",
            StopReason::Breakdown(BreakdownKind::Preconditioner) => "breakdown-preconditioner",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    /// `γ_0 … γ_m`
    pub gammas: Vec<f64>,
    /// `z_0 … z_{m−1}` when vectors were stored.
    pub z_store: Option<Vec<Vec<f64>>>,
    /// `q_j = A w_j`
    pub q_store: Option<Vec<Vec<f64>>>,
    pub w_store: Option<Vec<Vec<f64>>>,
    pub x0: Vec<f64>,
    pub r0: Vec<f64>,
    pub stop_reason: Option<StopReason>,
}

impl SolveTrace {
    /// Number of completed steps.
    pub fn m(&self) -> usize {
        self.records.len()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.alpha).collect()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.beta).collect()
    }

    pub fn converged(&self) -> bool {
        matches!(
            self.stop_reason,
            Some(
                StopReason::ResidualRatio
                    | StopReason::MinresStyle
                    | StopReason::Stagnation
                    | StopReason::AbsoluteFloor
            )
        )
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&[
            "iter",
            "alpha",
            "beta",
            "gamma",
            "delta",
            "corr_mnorm_sq",
            "t_frob_sq",
            "energy_decrement",
        ]);
        for (i, r) in self.records.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(
                [
                    r.alpha,
                    r.beta,
                    r.gamma,
                    r.delta,
                    r.corr_mnorm_sq,
                    r.t_frob_sq,
                    r.energy_decrement,
                ]
                .iter()
                .map(|v| fmt_f64(*v)),
            );
            t.push(row);
        }
        t
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.to_table().write_to(w)
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub trace: SolveTrace,
}

/// Which criteria hold for the last completed step of a trace.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StopDecision {
    pub residual_ratio: bool,
    pub minres_style: bool,
    pub stagnation: bool,
    pub absolute_floor: bool,
}

impl StopDecision {
    pub fn first(&self) -> Option<StopReason> {
        if self.absolute_floor {
            Some(StopReason::AbsoluteFloor)
        } else if self.residual_ratio {
            Some(StopReason::ResidualRatio)
        } else if self.minres_style {
            Some(StopReason::MinresStyle)
        } else if self.stagnation {
            Some(StopReason::Stagnation)
        } else {
            None
        }
    }
}

/// Evaluates the enabled criteria on `γ_m` and the last record.
///
/// An exactly vanishing `γ_m` satisfies every enabled criterion.
pub fn stopping_check(trace: &SolveTrace, cfg: &SolveConfig) -> StopDecision {
    let mut d = StopDecision::default();
    let (Some(&gamma0), Some(&gamma)) = (trace.gammas.first(), trace.gammas.last()) else {
        return d;
    };
    let c = cfg.criteria;
    if gamma == 0.0 {
        d.residual_ratio = c.residual_ratio;
        d.minres_style = c.minres_style;
        d.stagnation = c.stagnation;
        d.absolute_floor = cfg.abs_floor > 0.0;
        return d;
    }
    let res = gamma.max(0.0).sqrt();
    d.absolute_floor = cfg.abs_floor > 0.0 && res < cfg.abs_floor;
    d.residual_ratio = c.residual_ratio && res < cfg.eps * gamma0.max(0.0).sqrt();
    if let Some(last) = trace.records.last() {
        d.minres_style = c.minres_style
            && res < cfg.eps * last.t_frob_sq.max(0.0).sqrt() * last.corr_mnorm_sq.max(0.0).sqrt();
        let window = cfg.stagnation_window;
        d.stagnation = c.stagnation
            && trace.records.len() >= window
            && trace.records[trace.records.len() - window..]
                .iter()
                .all(|r| r.energy_decrement < cfg.eps * cfg.eps);
    }
    d
}

/// Per-step norms carried by the trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceNorms {
    /// `‖r_i‖²_{M⁻¹} = γ_i`
    pub residual_sq: f64,
    /// `‖x_{i+1} − x_0‖²_M`
    pub corr_mnorm_sq: f64,
    /// `‖T_{i+1}‖²_F`
    pub t_frob_sq: f64,
    pub energy_decrement: f64,
}

pub fn trace_norms(trace: &SolveTrace) -> Vec<TraceNorms> {
    trace
        .records
        .iter()
        .map(|r| TraceNorms {
            residual_sq: r.gamma,
            corr_mnorm_sq: r.corr_mnorm_sq,
            t_frob_sq: r.t_frob_sq,
            energy_decrement: r.energy_decrement,
        })
        .collect()
}

/// Running sums behind the norm recurrences.
#[derive(Default)]
struct Recurrences {
    /// `‖w_i‖²_M`
    w_mnorm_sq: f64,
    /// `⟨x_i − x_0, M w_i⟩`
    cross: f64,
    corr_mnorm_sq: f64,
    t_frob_sq: f64,
    prev: Option<(f64, f64)>,
}

impl Recurrences {
    fn new(gamma0: f64) -> Self {
        Self {
            w_mnorm_sq: gamma0,
            ..Default::default()
        }
    }

    /// Advances with step `i` and returns the record.
    fn step(&mut self, alpha: f64, gamma: f64, delta: f64, gamma_next: f64) -> IterationRecord {
        let beta = gamma_next / gamma;
        self.corr_mnorm_sq += alpha * alpha * self.w_mnorm_sq + 2.0 * alpha * self.cross;
        let mu = match self.prev {
            None => 1.0 / alpha,
            Some((a, b)) => 1.0 / alpha + b / a,
        };
        let eta_prev_sq = match self.prev {
            None => 0.0,
            Some((a, b)) => b / (a * a),
        };
        self.t_frob_sq += mu * mu + 2.0 * eta_prev_sq;
        let record = IterationRecord {
            alpha,
            beta,
            gamma,
            delta,
            corr_mnorm_sq: self.corr_mnorm_sq.max(0.0),
            t_frob_sq: self.t_frob_sq,
            energy_decrement: gamma * gamma / delta,
        };
        self.cross = beta * (self.cross + alpha * self.w_mnorm_sq);
        self.w_mnorm_sq = gamma_next + beta * beta * self.w_mnorm_sq;
        self.prev = Some((alpha, beta));
        record
    }
}

/// Conjugate gradient on `A x = b` preconditioned by `M⁻¹`, started at `x0`.
///
/// With a projector the preconditioned residual is `z = P M⁻¹ r`; `x0` must
/// then come from the matching augmented initialization so that `Cᵀ r_0 = 0`.
/// Breakdowns and exhausted iteration budgets are reported through
/// [`SolveTrace::stop_reason`], not as errors.
pub fn pcg_solve(
    a: &dyn LinearMap,
    m_inv: &dyn LinearMap,
    b: &[f64],
    x0: &[f64],
    cfg: &SolveConfig,
    projector: Option<&dyn Projector>,
) -> Result<SolveResult> {
    cfg.validate()?;
    let n = a.dim();
    check_dim(n, m_inv.dim())?;
    check_dim(n, b.len())?;
    check_dim(n, x0.len())?;
    if let Some(p) = projector {
        check_dim(n, p.dim())?;
    }
    let store = cfg.store_vectors || cfg.reorthogonalize;

    let precondition = |r: &[f64]| -> Vec<f64> {
        let z = m_inv.apply(r);
        match projector {
            Some(p) => p.project(&z),
            None => z,
        }
    };

    let mut x = x0.to_vec();
    let mut r = b.to_vec();
    axpy(-1.0, &a.apply(x0), &mut r);
    let mut z = precondition(&r);
    let mut gamma = dot(&z, &r);

    let mut trace = SolveTrace {
        gammas: vec![gamma],
        x0: x0.to_vec(),
        r0: r.clone(),
        z_store: store.then(Vec::new),
        q_store: store.then(Vec::new),
        w_store: store.then(Vec::new),
        ..Default::default()
    };
    // Residuals paired with the stored z, needed by the Gram-Schmidt pass.
    let mut r_store: Vec<Vec<f64>> = Vec::new();

    if gamma < 0.0 && gamma.abs() > BREAKDOWN_TOLERANCE {
        warn!("initial preconditioned residual has negative norm {gamma:e}");
        trace.stop_reason = Some(StopReason::Breakdown(BreakdownKind::Preconditioner));
        return Ok(SolveResult { x, trace });
    }
    if gamma <= BREAKDOWN_TOLERANCE {
        trace.gammas[0] = 0.0;
        trace.stop_reason = stopping_check(&trace, cfg).first();
        return Ok(SolveResult { x, trace });
    }

    let mut rec = Recurrences::new(gamma);
    let mut w = z.clone();
    let mut q = vec![0.0; n];
    loop {
        if trace.records.len() == cfg.max_iter {
            trace.stop_reason = Some(StopReason::MaxIter);
            break;
        }
        a.apply_into(&w, &mut q);
        let delta = dot(&w, &q);
        if !(delta > BREAKDOWN_TOLERANCE) || !delta.is_finite() {
            warn!(
                "curvature breakdown at step {}: delta = {delta:e}",
                trace.records.len()
            );
            trace.stop_reason = Some(StopReason::Breakdown(BreakdownKind::Curvature));
            break;
        }
        let alpha = gamma / delta;
        axpy(alpha, &w, &mut x);
        if cfg.reorthogonalize {
            r_store.push(r.clone());
        }
        axpy(-alpha, &q, &mut r);
        let step = trace.records.len() + 1;
        if let Some(p) = projector {
            if cfg.reproject_every > 0 && step.is_multiple_of(cfg.reproject_every) {
                r = p.project_residual(&r);
            }
        }
        if store {
            trace.z_store.as_mut().unwrap().push(std::mem::take(&mut z));
            trace.q_store.as_mut().unwrap().push(q.clone());
            trace.w_store.as_mut().unwrap().push(w.clone());
        }

        z = precondition(&r);
        if cfg.reorthogonalize {
            let zs = trace.z_store.as_ref().unwrap();
            // Two passes of classical Gram-Schmidt.
            for _ in 0..2 {
                for (zj, (rj, gj)) in zs.iter().zip(r_store.iter().zip(&trace.gammas)) {
                    let c = dot(rj, &z) / gj;
                    axpy(-c, zj, &mut z);
                }
            }
        }
        let mut gamma_next = dot(&z, &r);
        let negative = gamma_next < 0.0 && gamma_next.abs() > ROUNDOFF_GAMMA * trace.gammas[0];
        if gamma_next <= BREAKDOWN_TOLERANCE && !negative {
            gamma_next = 0.0;
        }
        let record = rec.step(alpha, gamma, delta, if negative { 0.0 } else { gamma_next });
        trace.records.push(record);
        trace.gammas.push(gamma_next);
        if negative {
            warn!("preconditioner breakdown at step {step}: gamma = {gamma_next:e}");
            trace.stop_reason = Some(StopReason::Breakdown(BreakdownKind::Preconditioner));
            break;
        }
        if let Some(reason) = stopping_check(&trace, cfg).first() {
            trace.stop_reason = Some(reason);
            break;
        }
        let beta = record.beta;
        for (wi, zi) in w.iter_mut().zip(&z) {
            *wi = zi + beta * *wi;
        }
        gamma = gamma_next;
    }
    debug!(
        "pcg stopped after {} steps: {:?}",
        trace.m(),
        trace.stop_reason
    );
    Ok(SolveResult { x, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm, sub, DenseMatrix};
    use crate::operator::{CholeskyInverse, Diagonal};
    use crate::testutil::{random_spd, random_vector};

    fn fix_a() -> (Diagonal, Diagonal, Vec<f64>) {
        (
            Diagonal(vec![3.0, 1.0]),
            Diagonal::identity(2),
            vec![3.0, 1.0],
        )
    }

    #[test]
    fn identity_system_one_step() {
        let b = random_vector(6, 1);
        let id = Diagonal::identity(6);
        let res = pcg_solve(&id, &id, &b, &[0.0; 6], &SolveConfig::default(), None).unwrap();
        assert_eq!(res.trace.m(), 1);
        assert!(norm(&sub(&res.x, &b)) < 1e-14);
    }

    #[test]
    fn fix_a_by_hand() {
        let (a, m, b) = fix_a();
        let res = pcg_solve(&a, &m, &b, &[0.0; 2], &SolveConfig::default(), None).unwrap();
        assert!(res.trace.m() <= 2);
        assert_eq!(res.trace.gammas[0], 10.0);
        assert!((res.x[0] - 1.0).abs() < 1e-14 && (res.x[1] - 1.0).abs() < 1e-14);
        assert_eq!(res.trace.stop_reason, Some(StopReason::ResidualRatio));
        // Hand CG: α_0 = 10/28, r_1 = (3, 1) − α_0 (9, 1).
        let alpha0 = 10.0 / 28.0;
        assert!((res.trace.records[0].alpha - alpha0).abs() < 1e-15);
        let r1 = [3.0 - alpha0 * 9.0, 1.0 - alpha0];
        assert!((res.trace.gammas[1] - dot(&r1, &r1)).abs() < 1e-12);
    }

    #[test]
    fn fix_a_gamma_matches_direct_norm() {
        let (a, m, b) = fix_a();
        let cfg = SolveConfig {
            eps: 1e-30,
            store_vectors: true,
            ..Default::default()
        };
        let res = pcg_solve(&a, &m, &b, &[0.0; 2], &cfg, None).unwrap();
        let mut r = b.clone();
        for (i, rec) in res.trace.records.iter().enumerate() {
            assert!((rec.gamma - dot(&r, &r)).abs() <= 1e-12 * rec.gamma.max(1.0));
            axpy(-rec.alpha, &res.trace.q_store.as_ref().unwrap()[i], &mut r);
        }
    }

    #[test]
    fn exact_zero_fires_everything() {
        let trace = SolveTrace {
            gammas: vec![1.0, 0.0],
            records: vec![],
            ..Default::default()
        };
        let cfg = SolveConfig {
            criteria: Criteria {
                residual_ratio: true,
                minres_style: true,
                stagnation: true,
            },
            ..Default::default()
        };
        let d = stopping_check(&trace, &cfg);
        assert!(d.residual_ratio && d.minres_style && d.stagnation && !d.absolute_floor);
    }

    #[test]
    fn stagnation_needs_full_window() {
        let eps = 1e-3;
        let rec = IterationRecord {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            delta: 1.0,
            corr_mnorm_sq: 1.0,
            t_frob_sq: 1.0,
            energy_decrement: 0.99 * eps * eps,
        };
        let cfg = SolveConfig {
            eps,
            criteria: Criteria::STAGNATION,
            stagnation_window: 3,
            ..Default::default()
        };
        let mut trace = SolveTrace {
            gammas: vec![1.0],
            ..Default::default()
        };
        let mut fired = Vec::new();
        for _ in 0..4 {
            trace.records.push(rec);
            trace.gammas.push(1.0);
            fired.push(stopping_check(&trace, &cfg).stagnation);
        }
        assert_eq!(fired, vec![false, false, true, true]);
    }

    #[test]
    fn absolute_floor_applies_to_any_criterion() {
        let trace = SolveTrace {
            gammas: vec![1.0, 1e-6],
            ..Default::default()
        };
        let cfg = SolveConfig {
            eps: 1e-9,
            abs_floor: 1e-2,
            ..Default::default()
        };
        assert_eq!(
            stopping_check(&trace, &cfg).first(),
            Some(StopReason::AbsoluteFloor)
        );
    }

    #[test]
    fn curvature_breakdown_keeps_start() {
        let zero = Diagonal(vec![0.0; 3]);
        let id = Diagonal::identity(3);
        let res = pcg_solve(
            &zero,
            &id,
            &[1.0, 2.0, 3.0],
            &[0.5; 3],
            &SolveConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(
            res.trace.stop_reason,
            Some(StopReason::Breakdown(BreakdownKind::Curvature))
        );
        assert_eq!(res.x, vec![0.5; 3]);
    }

    #[test]
    fn max_iter_is_not_an_error() {
        let a = random_spd(20, 3, 1e4);
        let id = Diagonal::identity(20);
        let cfg = SolveConfig {
            max_iter: 3,
            eps: 1e-14,
            ..Default::default()
        };
        let res = pcg_solve(&a, &id, &random_vector(20, 4), &[0.0; 20], &cfg, None).unwrap();
        assert_eq!(res.trace.stop_reason, Some(StopReason::MaxIter));
        assert_eq!(res.trace.m(), 3);
    }

    #[test]
    fn rejects_bad_config() {
        let id = Diagonal::identity(2);
        for cfg in [
            SolveConfig {
                eps: 0.0,
                ..Default::default()
            },
            SolveConfig {
                max_iter: 0,
                ..Default::default()
            },
            SolveConfig {
                criteria: Criteria {
                    residual_ratio: false,
                    minres_style: false,
                    stagnation: false,
                },
                ..Default::default()
            },
        ] {
            assert!(pcg_solve(&id, &id, &[1.0, 1.0], &[0.0; 2], &cfg, None).is_err());
        }
        let floor_only = SolveConfig {
            criteria: Criteria::default(),
            abs_floor: 1e-3,
            ..Default::default()
        };
        let res = pcg_solve(&id, &id, &[1.0, 1.0], &[0.0; 2], &floor_only, None).unwrap();
        assert_eq!(res.trace.stop_reason, Some(StopReason::AbsoluteFloor));
        assert!(pcg_solve(&id, &id, &[1.0], &[0.0; 2], &SolveConfig::default(), None).is_err());
    }

    /// Correction norm recurrence against a fresh solve truncated at each step.
    #[test]
    fn correction_norm_recurrence_matches_truncated_runs() {
        let n = 30;
        let a = random_spd(n, 10, 1e2);
        let m = random_spd(n, 11, 10.0);
        let m_inv = CholeskyInverse::new(&m).unwrap();
        let b = random_vector(n, 12);
        let x0 = random_vector(n, 13);
        let cfg = SolveConfig {
            eps: 1e-12,
            max_iter: n,
            reorthogonalize: true,
            ..Default::default()
        };
        let full = pcg_solve(&a, &m_inv, &b, &x0, &cfg, None).unwrap();
        for k in 1..=full.trace.m() {
            let part = pcg_solve(
                &a,
                &m_inv,
                &b,
                &x0,
                &SolveConfig {
                    max_iter: k,
                    eps: 1e-300,
                    ..cfg.clone()
                },
                None,
            )
            .unwrap();
            let d = sub(&part.x, &x0);
            let direct = dot(&d, &m.matvec(&d));
            let rec = full.trace.records[k - 1].corr_mnorm_sq;
            assert!(
                (rec - direct).abs() <= 1e-8 * direct,
                "step {k}: {rec} vs {direct}"
            );
        }
    }

    #[test]
    fn frobenius_recurrence_matches_built_tridiagonal() {
        const N: usize = 25;
        let n = N;
        let a = random_spd(n, 20, 1e2);
        let id = Diagonal::identity(n);
        let cfg = SolveConfig {
            eps: 1e-12,
            max_iter: n,
            ..Default::default()
        };
        let res = pcg_solve(&a, &id, &random_vector(n, 21), &[0.0; N], &cfg, None).unwrap();
        let recs = &res.trace.records;
        for k in 1..=recs.len() {
            let mut t = DenseMatrix::zeros(k, k);
            for j in 0..k {
                t[(j, j)] = 1.0 / recs[j].alpha
                    + if j > 0 {
                        recs[j - 1].beta / recs[j - 1].alpha
                    } else {
                        0.0
                    };
                if j + 1 < k {
                    let eta = recs[j].beta.sqrt() / recs[j].alpha;
                    t[(j, j + 1)] = eta;
                    t[(j + 1, j)] = eta;
                }
            }
            let direct = t.frobenius_norm().powi(2);
            assert!((recs[k - 1].t_frob_sq - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn energy_decrements_telescope() {
        let n = 30;
        let a = random_spd(n, 30, 1e3);
        let m = random_spd(n, 31, 5.0);
        let m_inv = CholeskyInverse::new(&m).unwrap();
        let x_true = random_vector(n, 32);
        let b = a.matvec(&x_true);
        let x0 = random_vector(n, 33);
        let cfg = SolveConfig {
            eps: 1e-14,
            max_iter: 3 * n,
            ..Default::default()
        };
        let res = pcg_solve(&a, &m_inv, &b, &x0, &cfg, None).unwrap();
        let e0 = sub(&x0, &x_true);
        let err0 = dot(&e0, &a.matvec(&e0));
        let sum: f64 = res.trace.records.iter().map(|r| r.energy_decrement).sum();
        assert!((sum - err0).abs() <= 1e-8 * err0, "{sum} vs {err0}");
    }

    #[test]
    fn trace_csv_layout() {
        let (a, m, b) = fix_a();
        let res = pcg_solve(&a, &m, &b, &[0.0; 2], &SolveConfig::default(), None).unwrap();
        let mut buf = Vec::new();
        res.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iter,alpha,beta,gamma,delta,corr_mnorm_sq,t_frob_sq,energy_decrement"
        );
        assert!(lines.next().unwrap().starts_with("0,3.5714285714285"));
        let norms = trace_norms(&res.trace);
        assert_eq!(norms.len(), res.trace.m());
        assert_eq!(norms[0].residual_sq, 10.0);
    }
}
