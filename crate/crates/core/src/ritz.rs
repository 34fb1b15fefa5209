//! Ritz analysis of a conjugate gradient run.
//!
//! The CG coefficients define a symmetric tridiagonal matrix `T` whose
//! eigenpairs, combined with the normalized preconditioned residuals, give
//! `M`-orthonormal approximations of the generalized eigenpairs of `(A, M)`.
//! From these the solution can be filtered, re-weighted for another Tikhonov
//! coefficient and placed on an L-curve without touching the operator again.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::csv::{fmt_f64, Table};
use crate::linalg::{axpy, dense_sym_eig, dot, DenseMatrix};
use crate::operator::LinearMap;
use crate::pcg::SolveTrace;
use crate::{Error, Result};

/// Deviation of `VᵀMV` from the identity above which Ritz pairs are not trusted.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-4;

/// Default median width for the Picard contributions.
pub const PICARD_SMOOTH_WIDTH: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalMatrix {
    /// `μ_0 … μ_{m−1}`
    pub diag: Vec<f64>,
    /// `η_0 … η_{m−2}`
    pub offdiag: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let m = self.dim();
        let mut t = DenseMatrix::from_diagonal(&self.diag);
        for (j, eta) in self.offdiag.iter().enumerate() {
            t[(j, j + 1)] = *eta;
            t[(j + 1, j)] = *eta;
        }
        debug_assert_eq!(t.rows(), m);
        t
    }
}

/// `μ_0 = 1/α_0`, `μ_j = 1/α_j + β_{j−1}/α_{j−1}`, `η_j = √β_j / α_j`.
pub fn build_tridiagonal(trace: &SolveTrace) -> Result<TridiagonalMatrix> {
    let recs = &trace.records;
    if recs.is_empty() {
        return Err(Error::InvalidConfig(
            "tridiagonal matrix needs at least one iteration".into(),
        ));
    }
    if let Some(i) = recs
        .iter()
        .position(|r| r.alpha == 0.0 || !r.alpha.is_finite())
    {
        return Err(Error::ZeroStep(i));
    }
    let m = recs.len();
    let mut diag = Vec::with_capacity(m);
    let mut offdiag = Vec::with_capacity(m.saturating_sub(1));
    for j in 0..m {
        let mut mu = 1.0 / recs[j].alpha;
        if j > 0 {
            mu += recs[j - 1].beta / recs[j - 1].alpha;
        }
        diag.push(mu);
        if j + 1 < m {
            offdiag.push(recs[j].beta.max(0.0).sqrt() / recs[j].alpha);
        }
    }
    Ok(TridiagonalMatrix { diag, offdiag })
}

/// `T = Ξ Θ Ξᵀ` with eigenvalues in decreasing order.
#[derive(Clone, Debug)]
pub struct TridiagSpectrum {
    pub values: Vec<f64>,
    pub xi: DenseMatrix,
}

pub fn tridiag_eig(t: &TridiagonalMatrix) -> Result<TridiagSpectrum> {
    let spec = dense_sym_eig(&t.to_dense())?;
    Ok(TridiagSpectrum {
        values: spec.values,
        xi: spec.vectors,
    })
}

/// Ritz pairs of the pencil `(A, M)` extracted from a solve on `A + λ_s M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RitzSet {
    /// Ritz values of `(A, M)` in decreasing order; those of the solved
    /// operator are `theta + shift`.
    pub theta: Vec<f64>,
    /// Tikhonov coefficient `λ_s` of the solve.
    pub shift: f64,
    /// `M`-orthonormal Ritz vectors, one per entry of `theta`.
    pub vectors: Vec<Vec<f64>>,
    /// `v_jᵀ r_{A,0}`
    pub r_a: Vec<f64>,
    /// `v_jᵀ r_{M,0}`
    pub r_m: Vec<f64>,
    /// Iteration count of the source solve.
    pub m: usize,
    /// Length of the leading block that passed the orthonormality check.
    pub valid: usize,
}

impl RitzSet {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn degraded(&self) -> bool {
        self.valid < self.len()
    }

    /// Recomputes the projections for the split `r_0 = r_{A,0} + λ_s r_{M,0}`.
    pub fn set_split(&mut self, r_a0: &[f64], r_m0: &[f64]) {
        self.r_a = self.vectors.iter().map(|v| dot(v, r_a0)).collect();
        self.r_m = self.vectors.iter().map(|v| dot(v, r_m0)).collect();
    }

    /// `v_jᵀ r_0` for the solved system.
    pub fn r_combined(&self, lambda: f64) -> Vec<f64> {
        self.r_a
            .iter()
            .zip(&self.r_m)
            .map(|(a, m)| a + lambda * m)
            .collect()
    }

    /// `VᵀMV − I`.
    pub fn orthonormality_defects(&self, m: &dyn LinearMap) -> DenseMatrix {
        let k = self.len();
        let mv: Vec<Vec<f64>> = self.vectors.iter().map(|v| m.apply(v)).collect();
        let mut g = DenseMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let v = dot(&self.vectors[i], &mv[j]) - if i == j { 1.0 } else { 0.0 };
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// Sets `valid` to the longest leading block whose `VᵀMV` deviates from
    /// the identity by at most `tol` entry-wise.
    pub fn check_orthonormality(&mut self, m: &dyn LinearMap, tol: f64) -> usize {
        let g = self.orthonormality_defects(m);
        let k = self.len();
        let mut valid = k;
        'outer: for i in 0..k {
            for j in 0..=i {
                if !(g[(i, j)].abs() <= tol) {
                    valid = i;
                    break 'outer;
                }
            }
        }
        if valid < k {
            warn!("Ritz set degraded: only the leading {valid} of {k} vectors are M-orthonormal");
        }
        self.valid = valid;
        valid
    }
}

/// Sign-alternating normalized residuals `ẑ_j = (−1)^j z_j / √γ_j`.
fn normalized_z(trace: &SolveTrace) -> Result<Vec<Vec<f64>>> {
    let zs = trace.z_store.as_ref().ok_or(Error::MissingStore("z"))?;
    let m = trace.m();
    if zs.len() < m {
        return Err(Error::MissingStore("z"));
    }
    Ok(zs[..m]
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 } / trace.gammas[j].sqrt();
            z.iter().map(|v| s * v).collect()
        })
        .collect())
}

/// `Y Ξ` for a list of columns `Y`.
fn combine(cols: &[Vec<f64>], xi: &DenseMatrix) -> Vec<Vec<f64>> {
    let n = cols.first().map_or(0, Vec::len);
    (0..xi.cols())
        .map(|k| {
            let mut v = vec![0.0; n];
            for (j, c) in cols.iter().enumerate() {
                axpy(xi[(j, k)], c, &mut v);
            }
            v
        })
        .collect()
}

/// `V = Ẑ Ξ`. The projections are taken against the solve's `r_0`, i.e. as
/// if `r_{A,0} = r_0` and `r_{M,0} = 0`; see [`RitzSet::set_split`].
pub fn ritz_vectors(trace: &SolveTrace, spec: &TridiagSpectrum, shift: f64) -> Result<RitzSet> {
    let zhat = normalized_z(trace)?;
    if spec.xi.rows() != zhat.len() {
        return Err(Error::DimensionMismatch {
            expected: zhat.len(),
            found: spec.xi.rows(),
        });
    }
    let vectors = combine(&zhat, &spec.xi);
    let r_a = vectors.iter().map(|v| dot(v, &trace.r0)).collect();
    let k = vectors.len();
    Ok(RitzSet {
        theta: spec.values.iter().map(|t| t - shift).collect(),
        shift,
        vectors,
        r_a,
        r_m: vec![0.0; k],
        m: trace.m(),
        valid: k,
    })
}

/// Tridiagonal assembly, its eigendecomposition and the Ritz vectors in one call.
pub fn extract(trace: &SolveTrace, shift: f64) -> Result<(RitzSet, TridiagSpectrum)> {
    let spec = tridiag_eig(&build_tridiagonal(trace)?)?;
    Ok((ritz_vectors(trace, &spec, shift)?, spec))
}

/// Image of the Ritz vectors by the solved operator, from the stored `q_j`:
/// `A ẑ_0 = q_0/√γ_0` and `A ẑ_{j+1} = (−1)^{j+1}(q_{j+1} − β_j q_j)/√γ_{j+1}`.
pub fn ritz_apply_a(trace: &SolveTrace, spec: &TridiagSpectrum) -> Result<Vec<Vec<f64>>> {
    let qs = trace.q_store.as_ref().ok_or(Error::MissingStore("q"))?;
    let m = trace.m();
    if m == 0 || qs.len() < m {
        return Err(Error::MissingStore("q"));
    }
    let az: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let mut v = qs[j].clone();
            if j > 0 {
                axpy(-trace.records[j - 1].beta, &qs[j - 1], &mut v);
            }
            let s = if j % 2 == 0 { 1.0 } else { -1.0 } / trace.gammas[j].sqrt();
            v.iter_mut().for_each(|x| *x *= s);
            v
        })
        .collect();
    Ok(combine(&az, &spec.xi))
}

/// A-normalized Ritz vectors.
#[derive(Clone, Debug, Default)]
pub struct ANormalized {
    pub vectors: Vec<Vec<f64>>,
    pub images: Vec<Vec<f64>>,
    /// Positions in the source set of the kept columns.
    pub kept: Vec<usize>,
}

/// Scales each `v_j` and `A v_j` by `(θ_j + λ_s)^{−1/2}` so that the kept
/// columns satisfy `V'ᵀ A_{λ_s} V' = I`. Values within round-off of zero are
/// skipped with a warning; clearly negative ones are an error.
pub fn a_normalize(ritz: &RitzSet, av: &[Vec<f64>]) -> Result<ANormalized> {
    if av.len() != ritz.len() {
        return Err(Error::DimensionMismatch {
            expected: ritz.len(),
            found: av.len(),
        });
    }
    let scale = ritz
        .theta
        .iter()
        .map(|t| (t + ritz.shift).abs())
        .fold(0.0f64, f64::max);
    let floor = 1e-12 * scale;
    let mut out = ANormalized::default();
    for (j, (v, a)) in ritz.vectors.iter().zip(av).enumerate() {
        let t = ritz.theta[j] + ritz.shift;
        if t.abs() <= floor {
            warn!("Ritz value {j} is {t:e}, column excluded from the A-normalized set");
            continue;
        }
        if t < 0.0 {
            return Err(Error::NonPositiveRitz { index: j, value: t });
        }
        let s = 1.0 / t.sqrt();
        out.vectors.push(v.iter().map(|x| s * x).collect());
        out.images.push(a.iter().map(|x| s * x).collect());
        out.kept.push(j);
    }
    Ok(out)
}

/// Coefficients `(r_{A,j} + λ r_{M,j}) / (θ_j + λ)` for `j < i`.
fn coefficients(ritz: &RitzSet, lambda: f64, i: usize) -> Result<Vec<f64>> {
    (0..i)
        .map(|j| {
            let d = ritz.theta[j] + lambda;
            if d == 0.0 || !d.is_finite() {
                Err(Error::SingularShift { index: j, lambda })
            } else {
                Ok((ritz.r_a[j] + lambda * ritz.r_m[j]) / d)
            }
        })
        .collect()
}

/// `x̃ = x0 + Σ_{j<i} (r_{A,j} + λ r_{M,j}) / (θ_j + λ) v_j`
pub fn filtered_solution(ritz: &RitzSet, x0: &[f64], lambda: f64, i: usize) -> Result<Vec<f64>> {
    if i > ritz.len() {
        return Err(Error::InvalidConfig(format!(
            "truncation {i} exceeds {} Ritz pairs",
            ritz.len()
        )));
    }
    if !ritz.is_empty() {
        crate::linalg::check_dim(ritz.dim(), x0.len())?;
    }
    let c = coefficients(ritz, lambda, i)?;
    let mut x = x0.to_vec();
    for (cj, v) in c.iter().zip(&ritz.vectors) {
        axpy(*cj, v, &mut x);
    }
    Ok(x)
}

/// One point of the Ritz L-curve after `i` terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LcurvePoint {
    pub i: usize,
    /// `‖x̃_i − x0‖²_M`
    pub mnorm_sq: f64,
    /// Drop of the regularized energy error, `‖x0 − x_λ‖²_{A_λ} − ‖x̃_i − x_λ‖²_{A_λ}`.
    pub energy_drop: f64,
    /// `‖x̃_i − x‖²_A − ‖x0 − x‖²_A` for the non-regularized solution `x`.
    pub err_offset: f64,
}

pub fn ritz_lcurve(ritz: &RitzSet, lambda: f64) -> Result<Vec<LcurvePoint>> {
    let c = coefficients(ritz, lambda, ritz.len())?;
    let mut p = LcurvePoint {
        i: 0,
        mnorm_sq: 0.0,
        energy_drop: 0.0,
        err_offset: 0.0,
    };
    let mut out = Vec::with_capacity(c.len());
    for (j, cj) in c.iter().enumerate() {
        let num = ritz.r_a[j] + lambda * ritz.r_m[j];
        p.i = j + 1;
        p.mnorm_sq += cj * cj;
        p.energy_drop += cj * num;
        p.err_offset += cj * (ritz.theta[j] * cj - 2.0 * ritz.r_a[j]);
        out.push(p);
    }
    Ok(out)
}

pub fn lcurve_table(points: &[LcurvePoint]) -> Table {
    let mut t = Table::new(&["i", "mnorm_sq", "energy_drop", "err_offset"]);
    for p in points {
        t.push(vec![
            p.i.to_string(),
            fmt_f64(p.mnorm_sq),
            fmt_f64(p.energy_drop),
            fmt_f64(p.err_offset),
        ]);
    }
    t
}

/// Slope magnitudes `1/(θ_j + λ)` of the Ritz L-curve.
pub fn lcurve_slopes(ritz: &RitzSet, lambda: f64) -> Vec<f64> {
    ritz.theta.iter().map(|t| 1.0 / (t + lambda)).collect()
}

/// Corner of the L-curve of the solved operator; see [`corner_index_at`].
pub fn corner_index(ritz: &RitzSet) -> usize {
    corner_index_at(ritz, ritz.shift)
}

/// Number of leading Ritz terms before the largest jump of slope
/// `1/(θ_{j+1} + λ) − 1/(θ_j + λ)`; ties go to the smaller index. Only the
/// leading block with `θ + λ > 0` is considered.
pub fn corner_index_at(ritz: &RitzSet, lambda: f64) -> usize {
    let positive = ritz.theta.iter().take_while(|t| **t + lambda > 0.0).count();
    if positive < 2 {
        return positive;
    }
    let mut best = 1;
    let mut best_gap = f64::NEG_INFINITY;
    for j in 0..positive - 1 {
        let gap = 1.0 / (ritz.theta[j + 1] + lambda) - 1.0 / (ritz.theta[j] + lambda);
        if gap > best_gap {
            best_gap = gap;
            best = j + 1;
        }
    }
    best
}

/// Running median with edge replication; width 1 is the identity.
pub fn median_smooth(values: &[f64], width: usize) -> Vec<f64> {
    let half = width.max(1) / 2;
    let n = values.len();
    let mut window = Vec::with_capacity(2 * half + 1);
    (0..n)
        .map(|i| {
            window.clear();
            for k in 0..=2 * half {
                let idx = (i + k).saturating_sub(half).min(n - 1);
                window.push(values[idx]);
            }
            window.sort_by(|a, b| a.total_cmp(b));
            window[half]
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardRow {
    pub j: usize,
    pub theta: f64,
    pub abs_r_a: f64,
    pub lambda_abs_r_m: f64,
    pub abs_r: f64,
}

/// Contributions of the right-hand side per Ritz direction, in decreasing `θ`.
pub fn picard_table(ritz: &RitzSet, lambda: f64, smooth_width: usize) -> Vec<PicardRow> {
    let ra: Vec<f64> = ritz.r_a.iter().map(|v| v.abs()).collect();
    let rm: Vec<f64> = ritz.r_m.iter().map(|v| lambda * v.abs()).collect();
    let rc: Vec<f64> = ritz.r_combined(lambda).iter().map(|v| v.abs()).collect();
    let (ra, rm, rc) = (
        median_smooth(&ra, smooth_width),
        median_smooth(&rm, smooth_width),
        median_smooth(&rc, smooth_width),
    );
    (0..ritz.len())
        .map(|j| PicardRow {
            j: j + 1,
            theta: ritz.theta[j],
            abs_r_a: ra[j],
            lambda_abs_r_m: rm[j],
            abs_r: rc[j],
        })
        .collect()
}

pub fn picard_csv(rows: &[PicardRow]) -> Table {
    let mut t = Table::new(&["j", "theta", "abs_r_a", "lambda_abs_r_m", "abs_r"]);
    for r in rows {
        t.push(vec![
            r.j.to_string(),
            fmt_f64(r.theta),
            fmt_f64(r.abs_r_a),
            fmt_f64(r.lambda_abs_r_m),
            fmt_f64(r.abs_r),
        ]);
    }
    t
}

/// [`picard_cutoff_with`] at the default smoothing width.
pub fn picard_cutoff(ritz: &RitzSet) -> usize {
    picard_cutoff_with(ritz, PICARD_SMOOTH_WIDTH)
}

/// First `j` (1-based) after which the smoothed ratio `|r_j| / (θ_j + λ_s)`
/// rises for two consecutive steps, or `m` if it never does. The
/// contributions are those of the solved system.
pub fn picard_cutoff_with(ritz: &RitzSet, smooth_width: usize) -> usize {
    let k = ritz.len();
    let r: Vec<f64> = ritz
        .r_combined(ritz.shift)
        .iter()
        .map(|v| v.abs())
        .collect();
    let r = median_smooth(&r, smooth_width);
    let rho: Vec<f64> = r
        .iter()
        .zip(&ritz.theta)
        .map(|(r, t)| r / (t + ritz.shift))
        .collect();
    (0..k.saturating_sub(2))
        .find(|&j| rho[j + 1] > rho[j] && rho[j + 2] > rho[j + 1])
        .map_or(k, |j| j + 1)
}

/// Relative change of the leading `k` Ritz values between two sets.
pub fn ritz_value_drift(before: &RitzSet, after: &RitzSet, k: usize) -> Vec<f64> {
    before
        .theta
        .iter()
        .zip(&after.theta)
        .take(k)
        .map(|(a, b)| ((b - a) / a).abs())
        .collect()
}
