use std::f64::consts::PI;

use proptest::prelude::*;
use regkrylov::linalg::{dense_sym_eig, dot, norm, tsvd_solve, Cholesky, DenseMatrix};
use regkrylov::pcg::{Criteria, SolveConfig};
use regkrylov_steklov::fem::{coupling, Grid};
use regkrylov_steklov::*;

fn clean(n_el: usize, k: u32) -> CauchyCase {
    CauchyCase {
        n_el,
        k,
        snr_db: f64::INFINITY,
        ..Default::default()
    }
}

/// Schur complement through a dense factorization of the whole interior.
fn dense_schur(grid: &Grid, left_free: bool) -> DenseMatrix {
    let n = grid.n_el;
    let i0 = if left_free { 0 } else { 1 };
    let interior: Vec<_> = (i0..n).flat_map(|i| (1..n).map(move |j| (i, j))).collect();
    let right: Vec<_> = (1..n).map(|j| (n, j)).collect();
    let k_ii = coupling(grid, &interior, &interior);
    let k_ir = coupling(grid, &interior, &right);
    let chol = Cholesky::new(&k_ii).unwrap();
    let mut s = coupling(grid, &right, &right);
    for c in 0..right.len() {
        let x = chol.solve(&k_ir.column(c));
        for r in 0..right.len() {
            s[(r, c)] -= dot(&k_ir.column(r), &x);
        }
    }
    s
}

#[test]
fn band_elimination_matches_dense_elimination() {
    let case = CauchyCase {
        n_el: 7,
        height: 1.3,
        width: 0.8,
        snr_db: f64::INFINITY,
        ..Default::default()
    };
    let pair = assemble_case(&case).unwrap();
    let grid = Grid::new(case.width, case.height, case.n_el);
    for (s, dense) in [
        (&pair.s_d, dense_schur(&grid, false)),
        (&pair.s_n, dense_schur(&grid, true)),
    ] {
        let diff = s.add_scaled(-1.0, &dense).unwrap().max_abs();
        assert!(diff <= 1e-12 * dense.max_abs(), "{diff:e}");
    }
}

#[test]
fn operators_are_symmetric_and_definite() {
    let pair = assemble_case(&clean(40, 3)).unwrap();
    assert!(pair.s_d.asymmetry() <= 1e-10 * pair.s_d.max_abs());
    assert!(pair.s_n.asymmetry() <= 1e-10 * pair.s_n.max_abs());
    assert!(Cholesky::new(&pair.s_d).is_ok());
    let spec = dense_sym_eig(&pair.operator()).unwrap();
    let lo = *spec.values.last().unwrap();
    assert!(
        lo >= -1e-12 * spec.values[0],
        "S_D − S_N has eigenvalue {lo:e}"
    );
    for seed in 0..5u64 {
        let u: Vec<f64> = (0..pair.dim())
            .map(|i| ((i as u64 * 31 + seed) as f64).sin())
            .collect();
        assert!(dot(&u, &pair.s_d.matvec(&u)) > 0.0);
    }
}

#[test]
fn leading_eigenvalues_follow_reference_sequence() {
    let pair = assemble_case(&clean(40, 3)).unwrap();
    let vals = dense_sym_eig(&pair.operator()).unwrap().values;
    let reference = [5.8e-4, 2.1e-6, 5.6e-9, 1.2e-11, 2.3e-14];
    for (j, (v, p)) in vals.iter().zip(&reference).enumerate() {
        let ok = match j {
            0 | 1 => (v - p).abs() <= 0.25 * p,
            2 => v / p <= 2.0 && p / v <= 2.0,
            _ => (v / p).log10().abs() <= 2.0,
        };
        assert!(ok, "eigenvalue {j}: {v:e} vs {p:e}");
    }
    for j in 0..4 {
        assert!(vals[j + 1] <= 1e-2 * vals[j], "ratio at {j}");
    }
}

/// The extreme eigenvalues of `S_D` follow the Dirichlet-to-Neumann map of the
/// strip, `kπ coth(kπT/H)` for mode `k`, times the mesh size.
#[test]
fn dirichlet_operator_spectrum_endpoints() {
    let pair = assemble_case(&clean(40, 3)).unwrap();
    let vals = dense_sym_eig(&pair.s_d).unwrap().values;
    let h = 1.0 / 40.0;
    let lo = *vals.last().unwrap();
    let expect = PI / PI.tanh() * h;
    assert!((lo - expect).abs() <= 0.02 * expect, "{lo:e} vs {expect:e}");
    assert!((vals[0] - 1.63).abs() <= 0.1 * 1.63, "{}", vals[0]);
}

#[test]
fn coarse_exact_solve_recovers_analytic_trace() {
    let case = CauchyCase {
        n_el: 8,
        k: 1,
        snr_db: f64::INFINITY,
        ..Default::default()
    };
    let pair = assemble_case(&case).unwrap();
    // the reduced operator is singular to round-off even on this mesh
    let u = tsvd_solve(&pair.operator(), &pair.b_d, 1e-12).unwrap();
    let reference = analytic_trace(&case);
    let err = compare::relative_error(&u, &reference);
    assert!(err <= 0.05, "relative error {err}");
}

#[test]
fn empirical_snr_matches_target() {
    let v: Vec<f64> = clean(40, 3).left_signal();
    let target = 10.0;
    let mut noise = 0.0;
    let trials = 1000;
    for seed in 0..trials {
        let noisy = add_noise(&v, target, seed).unwrap();
        let e: Vec<f64> = noisy.iter().zip(&v).map(|(a, b)| a - b).collect();
        noise += dot(&e, &e);
    }
    let snr = 10.0 * (dot(&v, &v) / (noise / trials as f64)).log10();
    assert!((snr - target).abs() <= 0.5, "{snr}");
}

fn cg(prec: Preconditioner, lambda: f64, max_iter: usize) -> Method {
    let cfg = SolveConfig {
        eps: 1e-9,
        max_iter,
        criteria: Criteria::MINRES_STYLE,
        ..Default::default()
    };
    Method::Cg {
        prec,
        reg: Regularizer::Sd,
        lambda,
        cfg,
    }
}

#[test]
fn jacobi_is_worse_than_dirichlet_preconditioner() {
    let case = CauchyCase::default();
    let pair = assemble_case(&case).unwrap();
    let sd = run_comparison(&case, &pair, &cg(Preconditioner::Sd, 0.0, 1000)).unwrap();
    let budget = sd.trace.as_ref().unwrap().m();
    let ja = run_comparison(&case, &pair, &cg(Preconditioner::Jacobi, 0.0, budget)).unwrap();
    assert!(
        ja.error > sd.error,
        "jacobi {} vs sd {}",
        ja.error,
        sd.error
    );
}

#[test]
fn slight_regularization_lets_jacobi_reduce_the_error() {
    let case = CauchyCase::default();
    let pair = assemble_case(&case).unwrap();
    let run = run_comparison(&case, &pair, &cg(Preconditioner::Jacobi, 1e-9, 20)).unwrap();
    assert_eq!(run.trace.as_ref().unwrap().m(), 20);
    let first = run.iterate_errors[0];
    assert!(run.error < 0.5 * first, "{:?}", run.iterate_errors);
}

#[test]
fn natural_lcurve_is_monotone() {
    let case = CauchyCase::default();
    let pair = assemble_case(&case).unwrap();
    for (prec, lambda, it) in [
        (Preconditioner::Identity, 0.0, 1000),
        (Preconditioner::Sd, 0.0, 1000),
        (Preconditioner::Jacobi, 0.0, 1000),
        (Preconditioner::Jacobi, 1e-9, 20),
        (Preconditioner::Sd, 1e-9, 1000),
    ] {
        let run = run_comparison(&case, &pair, &cg(prec, lambda, it)).unwrap();
        for w in run.natural.windows(2) {
            assert!(
                w[1].err_offset <= w[0].err_offset,
                "{prec} {lambda}: error grows"
            );
            assert!(
                w[1].mnorm_sq >= w[0].mnorm_sq,
                "{prec} {lambda}: norm shrinks"
            );
        }
        assert_eq!(run.euclid.len(), run.natural.len() + 1);
    }
}

#[test]
fn dirichlet_regularized_run_carries_ritz_pairs() {
    let case = CauchyCase::default();
    let pair = assemble_case(&case).unwrap();
    let run = run_comparison(&case, &pair, &cg(Preconditioner::Sd, 1e-9, 1000)).unwrap();
    let ritz = run.ritz.expect("ritz pairs");
    assert_eq!(ritz.len(), run.trace.unwrap().m());
    assert!(ritz.theta.windows(2).all(|w| w[0] >= w[1]));
    let other = run_comparison(&case, &pair, &cg(Preconditioner::Jacobi, 1e-9, 20)).unwrap();
    assert!(other.ritz.is_none());
}

#[test]
fn direct_baselines_identify_the_trace() {
    let case = CauchyCase::default();
    let pair = assemble_case(&case).unwrap();
    let sd = run_comparison(
        &case,
        &pair,
        &Method::Direct {
            reg: Regularizer::Sd,
            lambda: 1e-9,
        },
    )
    .unwrap();
    let id = run_comparison(
        &case,
        &pair,
        &Method::Direct {
            reg: Regularizer::Identity,
            lambda: 1e-9,
        },
    )
    .unwrap();
    assert!(
        sd.error < 0.3 && id.error < 0.3,
        "{} {}",
        sd.error,
        id.error
    );
    let tsvd = run_comparison(&case, &pair, &Method::Tsvd { eps_sigma: 1e-7 }).unwrap();
    assert!(tsvd.error < 0.3, "{}", tsvd.error);
    assert!(norm(&tsvd.u_r) > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn reduced_operators_keep_their_structure(n_el in 4usize..10, h in 0.5f64..2.0, t in 0.5f64..2.0) {
        let case = CauchyCase { n_el, height: h, width: t, snr_db: f64::INFINITY, ..Default::default() };
        let pair = assemble_case(&case).unwrap();
        prop_assert!(pair.s_d.asymmetry() <= 1e-10 * pair.s_d.max_abs());
        prop_assert!(Cholesky::new(&pair.s_d).is_ok());
        let vals = dense_sym_eig(&pair.operator()).unwrap().values;
        prop_assert!(*vals.last().unwrap() >= -1e-10 * vals[0]);
    }
}
