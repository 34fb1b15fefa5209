//! Tikhonov-regularized systems `(A + λM) x = b_A + λ b_M` solved with `M`
//! as the preconditioner.
//!
//! Keeping the two right-hand sides apart lets the Ritz pairs of a single
//! solve produce the solution, its `M`-norm and its error offset for any
//! other weight `λ`.

use log::{info, warn};

use crate::augmentation::{augmented_init, AugmentationBasis, ColumnLabel};
use crate::csv::Table;
use crate::linalg::{axpy, check_dim, dot};
use crate::operator::{shifted_map, LinearMap};
use crate::pcg::{pcg_solve, Projector, SolveConfig, SolveResult};
use crate::ritz::{corner_index_at, extract, ritz_apply_a, RitzSet, ORTHONORMALITY_TOLERANCE};
use crate::{Error, Result};

/// Terms with `|θ_j + λ|` below this fraction of `θ_1` are left out of the
/// reconstructions.
pub const LIMIT_GUARD: f64 = 1e-14;

pub struct TikhonovSystem<'a> {
    pub a: &'a dyn LinearMap,
    pub m: &'a dyn LinearMap,
    pub b_a: Vec<f64>,
    pub b_m: Vec<f64>,
    pub lambda: f64,
}

impl<'a> TikhonovSystem<'a> {
    pub fn new(
        a: &'a dyn LinearMap,
        m: &'a dyn LinearMap,
        b_a: Vec<f64>,
        b_m: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        check_dim(a.dim(), m.dim())?;
        check_dim(a.dim(), b_a.len())?;
        check_dim(a.dim(), b_m.len())?;
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(Self {
            a,
            m,
            b_a,
            b_m,
            lambda,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// `b_A + λ b_M`
    pub fn rhs(&self) -> Vec<f64> {
        let mut b = self.b_a.clone();
        axpy(self.lambda, &self.b_m, &mut b);
        b
    }

    /// `(b_A − A x0, b_M − M x0)`
    pub fn residual_split(&self, x0: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut ra = self.b_a.clone();
        axpy(-1.0, &self.a.apply(x0), &mut ra);
        let mut rm = self.b_m.clone();
        axpy(-1.0, &self.m.apply(x0), &mut rm);
        (ra, rm)
    }
}

#[derive(Clone, Debug)]
pub struct RegularizedSolve {
    pub result: SolveResult,
    pub ritz: Option<RitzSet>,
    /// `(A + λM) V` for the Ritz vectors, from the stored `q_j`.
    pub av: Option<Vec<Vec<f64>>>,
}

/// Augmented PCG on `A + λM` preconditioned by `m_inv`, started from
/// `x00` corrected on `Range(C)`.
///
/// With `want_ritz` the Ritz pairs are extracted, their projections split
/// between `r_{A,0}` and `r_{M,0}`, and their `M`-orthonormality checked.
pub fn solve_regularized(
    sys: &TikhonovSystem<'_>,
    m_inv: &dyn LinearMap,
    x00: &[f64],
    cfg: &SolveConfig,
    basis: &AugmentationBasis,
    want_ritz: bool,
) -> Result<RegularizedSolve> {
    let a_l = shifted_map(sys.a, sys.m, sys.lambda)?;
    let b = sys.rhs();
    let (x0, _) = augmented_init(x00, &b, basis, &a_l)?;
    let mut cfg = cfg.clone();
    cfg.store_vectors |= want_ritz;
    let projector: Option<&dyn Projector> = if basis.is_empty() { None } else { Some(basis) };
    let result = pcg_solve(&a_l, m_inv, &b, &x0, &cfg, projector)?;
    if !want_ritz || result.trace.m() == 0 {
        return Ok(RegularizedSolve {
            result,
            ritz: None,
            av: None,
        });
    }
    let (mut ritz, spec) = extract(&result.trace, sys.lambda)?;
    let (ra, rm) = sys.residual_split(&x0);
    ritz.set_split(&ra, &rm);
    ritz.check_orthonormality(sys.m, ORTHONORMALITY_TOLERANCE);
    let av = ritz_apply_a(&result.trace, &spec)?;
    Ok(RegularizedSolve {
        result,
        ritz: Some(ritz),
        av: Some(av),
    })
}

/// Reconstruction at one weight.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub lambda: f64,
    pub x: Vec<f64>,
    /// `‖x̃ − x0‖²_M`
    pub mnorm_sq: f64,
    /// `‖x̃ − x‖²_A − ‖x0 − x‖²_A`
    pub err_offset: f64,
    /// Terms left out because `θ_j + λ` vanished.
    pub dropped: usize,
}

/// `x̃ = x0 + Σ_{j<i} (r_{A,j} + λ r_{M,j}) / (θ_j + λ) v_j` with the
/// vanishing-denominator guard, together with its L-curve coordinates.
pub fn guarded_reconstruction(
    ritz: &RitzSet,
    x0: &[f64],
    lambda: f64,
    i: usize,
) -> Result<SweepPoint> {
    if i > ritz.len() {
        return Err(Error::InvalidConfig(format!(
            "truncation {i} exceeds {} Ritz pairs",
            ritz.len()
        )));
    }
    if !ritz.is_empty() {
        check_dim(ritz.dim(), x0.len())?;
    }
    let theta1 = ritz.theta.first().copied().unwrap_or(0.0).abs();
    let mut p = SweepPoint {
        lambda,
        x: x0.to_vec(),
        mnorm_sq: 0.0,
        err_offset: 0.0,
        dropped: 0,
    };
    for j in 0..i {
        let d = ritz.theta[j] + lambda;
        if !(d.abs() >= LIMIT_GUARD * theta1) || d == 0.0 {
            p.dropped += 1;
            continue;
        }
        let c = (ritz.r_a[j] + lambda * ritz.r_m[j]) / d;
        axpy(c, &ritz.vectors[j], &mut p.x);
        p.mnorm_sq += c * c;
        p.err_offset += c * (ritz.theta[j] * c - 2.0 * ritz.r_a[j]);
    }
    if p.dropped > 0 {
        info!(
            "lambda {lambda:e}: {} Ritz terms with vanishing denominator left out",
            p.dropped
        );
    }
    Ok(p)
}

/// Full-length reconstructions over a grid of weights.
pub fn lambda_sweep(ritz: &RitzSet, x0: &[f64], grid: &[f64]) -> Result<Vec<SweepPoint>> {
    grid.iter()
        .map(|&l| guarded_reconstruction(ritz, x0, l, ritz.len()))
        .collect()
}

pub fn sweep_table(points: &[SweepPoint]) -> Table {
    let mut t = Table::new(&["lambda", "mnorm_sq", "err_offset"]);
    for p in points {
        t.push_reals(&[p.lambda, p.mnorm_sq, p.err_offset]);
    }
    t
}

/// Weights of a multi-λ run: `lambda0` is solved, the others are
/// reconstructed from its Ritz pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaFamily {
    pub lambda0: f64,
    pub others: Vec<f64>,
}

impl LambdaFamily {
    pub fn new(lambda0: f64, others: Vec<f64>) -> Result<Self> {
        if std::iter::once(&lambda0)
            .chain(&others)
            .any(|l| !(*l >= 0.0) || !l.is_finite())
        {
            return Err(Error::InvalidConfig(
                "every lambda must be finite and >= 0".into(),
            ));
        }
        if others.iter().any(|l| *l > lambda0) {
            warn!("postprocessing above the solved weight {lambda0:e} is untested territory");
        }
        Ok(Self { lambda0, others })
    }

    /// `λ₀` followed by the others.
    pub fn all(&self) -> Vec<f64> {
        std::iter::once(self.lambda0)
            .chain(self.others.iter().copied())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Truncation {
    /// Stop at the L-curve corner of the reconstructed weight.
    #[default]
    Corner,
    /// Use every trusted Ritz pair.
    Full,
}

/// A sequence of linearized problems sharing `A` and `M`, only the
/// right-hand sides following the state.
pub trait NonlinearProblem {
    type State: Clone;

    fn operator(&self) -> &dyn LinearMap;

    fn regularizer(&self) -> &dyn LinearMap;

    /// Action of the (pseudo-)inverse of the regularizer.
    fn regularizer_inverse(&self) -> &dyn LinearMap;

    /// Columns spanning the kernel of the regularizer, if it is singular.
    fn kernel_basis(&self) -> Vec<Vec<f64>> {
        Vec::new()
    }

    /// `(b_A, b_M)` of the linearization at `state`.
    fn rhs(&self, state: &Self::State) -> (Vec<f64>, Vec<f64>);

    fn update(&self, state: &Self::State, delta: &[f64]) -> Self::State;
}

#[derive(Debug)]
pub struct MultiLambdaOutcome<S> {
    /// Final state per weight, `λ₀` first.
    pub states: Vec<(f64, S)>,
    /// Outer iterations completed for every weight.
    pub completed: usize,
    /// Inner iterations of each `λ₀` solve.
    pub inner_iterations: Vec<usize>,
    /// Set when a `λ₀` solve failed and the loop was cut short.
    pub error: Option<Error>,
    /// Ritz pairs of the last `λ₀` solve.
    pub last_ritz: Option<RitzSet>,
}

/// Outer loop where only `λ₀` is solved at each step and every other weight
/// advances with the reconstruction from the same Ritz pairs, using its own
/// right-hand side and coarse correction.
pub fn multi_lambda_outer<P: NonlinearProblem>(
    problem: &P,
    family: &LambdaFamily,
    initial: &P::State,
    cfg: &SolveConfig,
    outer: usize,
    truncation: Truncation,
) -> Result<MultiLambdaOutcome<P::State>> {
    let a = problem.operator();
    let m = problem.regularizer();
    let m_inv = problem.regularizer_inverse();
    let n = a.dim();
    let lambdas = family.all();
    let kernel = problem.kernel_basis();
    let bases = lambdas
        .iter()
        .map(|&l| {
            let a_l = shifted_map(a, m, l)?;
            AugmentationBasis::new(
                &a_l,
                kernel.clone(),
                vec![ColumnLabel::Kernel; kernel.len()],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut states: Vec<P::State> = vec![initial.clone(); lambdas.len()];
    let mut out = MultiLambdaOutcome {
        states: Vec::new(),
        completed: 0,
        inner_iterations: Vec::new(),
        error: None,
        last_ritz: None,
    };
    let zero = vec![0.0; n];
    for k in 0..outer {
        let (b_a, b_m) = problem.rhs(&states[0]);
        let solved = TikhonovSystem::new(a, m, b_a, b_m, lambdas[0])
            .and_then(|sys| solve_regularized(&sys, m_inv, &zero, cfg, &bases[0], true));
        let solved = match solved {
            Ok(s) => s,
            Err(e) => {
                warn!("outer iteration {k}: solve at lambda0 failed: {e}");
                out.error = Some(e);
                break;
            }
        };
        out.inner_iterations.push(solved.result.trace.m());
        let ritz = solved.ritz;
        for p in 1..lambdas.len() {
            let l = lambdas[p];
            let (b_a, b_m) = problem.rhs(&states[p]);
            let sys = TikhonovSystem::new(a, m, b_a, b_m, l)?;
            let a_l = shifted_map(a, m, l)?;
            let (x0, _) = augmented_init(&zero, &sys.rhs(), &bases[p], &a_l)?;
            let delta = match &ritz {
                Some(r) => {
                    let mut r = r.clone();
                    let (ra, rm) = sys.residual_split(&x0);
                    r.set_split(&ra, &rm);
                    let i = match truncation {
                        Truncation::Full => r.valid,
                        Truncation::Corner => corner_index_at(&r, l).min(r.valid),
                    };
                    guarded_reconstruction(&r, &x0, l, i)?.x
                }
                None => x0,
            };
            states[p] = problem.update(&states[p], &delta);
        }
        states[0] = problem.update(&states[0], &solved.result.x);
        out.last_ritz = ritz;
        out.completed = k + 1;
    }
    out.states = lambdas.into_iter().zip(states).collect();
    Ok(out)
}

/// `xᵀ M x`
pub fn mnorm_sq(m: &dyn LinearMap, x: &[f64]) -> f64 {
    dot(x, &m.apply(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm, sub, Cholesky, DenseMatrix};
    use crate::operator::{CholeskyInverse, Diagonal};
    use crate::testutil::{random_spd, random_vector};

    #[test]
    fn diagonal_fixture_by_hand() {
        let a = Diagonal(vec![3.0, 1.0]);
        let m = Diagonal(vec![2.0, 1.0]);
        let sys = TikhonovSystem::new(&a, &m, vec![3.0, 1.0], vec![0.0; 2], 0.5).unwrap();
        let cfg = SolveConfig {
            eps: 1e-14,
            ..Default::default()
        };
        let out = solve_regularized(
            &sys,
            &m.inverse(),
            &[0.0; 2],
            &cfg,
            &AugmentationBasis::empty(2),
            true,
        )
        .unwrap();
        let x = &out.result.x;
        assert!((x[0] - 0.75).abs() < 1e-12 && (x[1] - 2.0 / 3.0).abs() < 1e-12);
        let ritz = out.ritz.unwrap();
        // Generalized eigenvalues of (A, M) are 1.5 and 1.
        assert!((ritz.theta[0] - 1.5).abs() < 1e-12 && (ritz.theta[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_lambda_is_plain_solve() {
        let a = random_spd(10, 1, 20.0);
        let m = Diagonal::identity(10);
        let b = random_vector(10, 2);
        let sys = TikhonovSystem::new(&a, &m, b.clone(), vec![0.0; 10], 0.0).unwrap();
        let cfg = SolveConfig {
            eps: 1e-12,
            ..Default::default()
        };
        let out = solve_regularized(
            &sys,
            &m,
            &[0.0; 10],
            &cfg,
            &AugmentationBasis::empty(10),
            false,
        )
        .unwrap();
        let direct = Cholesky::new(&a).unwrap().solve(&b);
        assert!(norm(&sub(&out.result.x, &direct)) < 1e-9 * norm(&direct));
        assert!(out.ritz.is_none());
    }

    #[test]
    fn split_is_consistent() {
        let a = random_spd(8, 3, 10.0);
        let m = random_spd(8, 4, 3.0);
        let sys =
            TikhonovSystem::new(&a, &m, random_vector(8, 5), random_vector(8, 6), 0.7).unwrap();
        let x0 = random_vector(8, 7);
        let (ra, rm) = sys.residual_split(&x0);
        let a_l = shifted_map(&a, &m, 0.7).unwrap();
        let mut r0 = sys.rhs();
        axpy(-1.0, &a_l.apply(&x0), &mut r0);
        let combined: Vec<f64> = ra.iter().zip(&rm).map(|(x, y)| x + 0.7 * y).collect();
        assert!(norm(&sub(&combined, &r0)) < 1e-13 * norm(&r0));
    }

    #[test]
    fn sweep_matches_dense_solves() {
        let n = 20;
        let a = random_spd(n, 8, 1e2);
        let m = random_spd(n, 9, 4.0);
        let b_a = random_vector(n, 10);
        let b_m = random_vector(n, 11);
        let sys = TikhonovSystem::new(&a, &m, b_a.clone(), b_m.clone(), 1.0).unwrap();
        let cfg = SolveConfig {
            eps: 1e-300,
            max_iter: n,
            reorthogonalize: true,
            ..Default::default()
        };
        let m_inv = CholeskyInverse::new(&m).unwrap();
        let out = solve_regularized(
            &sys,
            &m_inv,
            &[0.0; 20],
            &cfg,
            &AugmentationBasis::empty(n),
            true,
        )
        .unwrap();
        let ritz = out.ritz.unwrap();
        for p in lambda_sweep(&ritz, &[0.0; 20], &[0.0, 0.1, 1.0, 10.0]).unwrap() {
            let op = a.add_scaled(p.lambda, &m).unwrap();
            let mut rhs = b_a.clone();
            axpy(p.lambda, &b_m, &mut rhs);
            let direct = Cholesky::new(&op).unwrap().solve(&rhs);
            assert!(
                norm(&sub(&p.x, &direct)) <= 1e-8 * norm(&direct),
                "lambda {}",
                p.lambda
            );
            assert!((p.mnorm_sq - mnorm_sq(&m, &direct)).abs() <= 1e-8 * p.mnorm_sq);
        }
    }

    #[test]
    fn guard_drops_vanishing_terms() {
        let ritz = RitzSet {
            theta: vec![2.0, 0.0],
            shift: 1.0,
            vectors: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            r_a: vec![2.0, 0.0],
            r_m: vec![0.0, 3.0],
            m: 2,
            valid: 2,
        };
        let p = guarded_reconstruction(&ritz, &[0.0; 2], 0.0, 2).unwrap();
        assert_eq!(p.dropped, 1);
        assert_eq!(p.x, vec![1.0, 0.0]);
        let p = guarded_reconstruction(&ritz, &[0.0; 2], 1.0, 2).unwrap();
        assert_eq!(p.dropped, 0);
        assert_eq!(p.x, vec![2.0 / 3.0, 3.0]);
    }

    #[test]
    fn rejects_negative_lambda() {
        let a = Diagonal(vec![1.0]);
        assert!(TikhonovSystem::new(&a, &a, vec![1.0], vec![0.0], -1.0).is_err());
        assert!(LambdaFamily::new(1.0, vec![-1.0]).is_err());
        assert_eq!(
            LambdaFamily::new(10.0, vec![1.0]).unwrap().all(),
            vec![10.0, 1.0]
        );
    }

    /// `x ↦ x` updates with a constant right-hand side: one outer step is a
    /// linear solve.
    struct Linear<'a> {
        a: &'a DenseMatrix,
        m: &'a DenseMatrix,
        m_inv: CholeskyInverse,
        b_a: Vec<f64>,
        b_m: Vec<f64>,
    }

    impl NonlinearProblem for Linear<'_> {
        type State = Vec<f64>;

        fn operator(&self) -> &dyn LinearMap {
            self.a
        }

        fn regularizer(&self) -> &dyn LinearMap {
            self.m
        }

        fn regularizer_inverse(&self) -> &dyn LinearMap {
            &self.m_inv
        }

        fn rhs(&self, _: &Vec<f64>) -> (Vec<f64>, Vec<f64>) {
            (self.b_a.clone(), self.b_m.clone())
        }

        fn update(&self, state: &Vec<f64>, delta: &[f64]) -> Vec<f64> {
            state.iter().zip(delta).map(|(s, d)| s + d).collect()
        }
    }

    #[test]
    fn one_outer_step_matches_sweep() {
        let n = 15;
        let a = random_spd(n, 20, 50.0);
        let m = random_spd(n, 21, 3.0);
        let problem = Linear {
            a: &a,
            m: &m,
            m_inv: CholeskyInverse::new(&m).unwrap(),
            b_a: random_vector(n, 22),
            b_m: random_vector(n, 23),
        };
        let cfg = SolveConfig {
            eps: 1e-300,
            max_iter: n,
            reorthogonalize: true,
            ..Default::default()
        };
        let family = LambdaFamily::new(2.0, vec![0.5, 0.1]).unwrap();
        let outcome =
            multi_lambda_outer(&problem, &family, &vec![0.0; n], &cfg, 1, Truncation::Full)
                .unwrap();
        assert_eq!(outcome.completed, 1);
        let ritz = outcome.last_ritz.clone().unwrap();
        let sweep = lambda_sweep(&ritz, &[0.0; 15], &[2.0, 0.5, 0.1]).unwrap();
        for ((l, state), p) in outcome.states.iter().zip(&sweep) {
            assert_eq!(*l, p.lambda);
            assert!(norm(&sub(state, &p.x)) <= 1e-8 * norm(&p.x));
        }
        let single = multi_lambda_outer(
            &problem,
            &LambdaFamily::new(2.0, vec![]).unwrap(),
            &vec![0.0; n],
            &cfg,
            1,
            Truncation::Full,
        )
        .unwrap();
        assert_eq!(single.states.len(), 1);
        assert_eq!(single.states[0].1, outcome.states[0].1);
    }
}
