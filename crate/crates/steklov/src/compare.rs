//! Identification of the right trace by direct and iterative methods.

use std::fmt;
use std::str::FromStr;

use regkrylov::augmentation::AugmentationBasis;
use regkrylov::linalg::{axpy, dot, norm, sub, tsvd_solve, Cholesky, DenseMatrix};
use regkrylov::operator::{CholeskyInverse, Diagonal};
use regkrylov::pcg::{SolveConfig, SolveTrace};
use regkrylov::ritz::RitzSet;
use regkrylov::tikhonov::{solve_regularized, TikhonovSystem};
use regkrylov::LinearMap;

use crate::case::{analytic_trace, CauchyCase, SteklovPair};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    Identity,
    /// `diag(S_D − S_N)`
    Jacobi,
    Sd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regularizer {
    Identity,
    Sd,
}

impl fmt::Display for Preconditioner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Identity => "id",
            Self::Jacobi => "jacobi",
            Self::Sd => "sd",
        })
    }
}

impl FromStr for Preconditioner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "id" => Ok(Self::Identity),
            "jacobi" => Ok(Self::Jacobi),
            "sd" => Ok(Self::Sd),
            _ => Err(Error::InvalidCase(format!(
                "unknown preconditioner {s:?}, expected id, jacobi or sd"
            ))),
        }
    }
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Identity => "id",
            Self::Sd => "sd",
        })
    }
}

impl FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "id" => Ok(Self::Identity),
            "sd" => Ok(Self::Sd),
            _ => Err(Error::InvalidCase(format!(
                "unknown regularizer {s:?}, expected id or sd"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Method {
    /// Spectral truncation keeping `σ > ε_σ σ_1`.
    Tsvd { eps_sigma: f64 },
    /// Dense solve of `(S_D − S_N) + λR`.
    Direct { reg: Regularizer, lambda: f64 },
    /// PCG on `(S_D − S_N) + λR` from zero.
    Cg {
        prec: Preconditioner,
        reg: Regularizer,
        lambda: f64,
        cfg: SolveConfig,
    },
}

/// Point of the iteration L-curve in the natural frame. The energy error is
/// known up to `‖x_0 − x‖²_A`, so it is reported as an offset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NaturalPoint {
    pub i: usize,
    pub err_offset: f64,
    pub mnorm_sq: f64,
}

/// Point of the iteration L-curve in the Euclidean frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EuclidPoint {
    pub i: usize,
    pub residual_sq: f64,
    pub norm_sq: f64,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub u_r: Vec<f64>,
    /// Relative L2 error of `u_r` against the analytic trace.
    pub error: f64,
    /// `x_0, x_1, …` for iterative methods.
    pub iterates: Vec<Vec<f64>>,
    /// Relative error of each iterate against the analytic trace.
    pub iterate_errors: Vec<f64>,
    pub trace: Option<SolveTrace>,
    pub natural: Vec<NaturalPoint>,
    pub euclid: Vec<EuclidPoint>,
    /// Ritz pairs when `S_D` is both regularizer and preconditioner.
    pub ritz: Option<RitzSet>,
}

pub fn relative_error(x: &[f64], reference: &[f64]) -> f64 {
    norm(&sub(x, reference)) / norm(reference)
}

fn regularizer(pair: &SteklovPair, reg: Regularizer) -> DenseMatrix {
    match reg {
        Regularizer::Identity => DenseMatrix::identity(pair.dim()),
        Regularizer::Sd => pair.s_d.clone(),
    }
}

fn preconditioner_inverse(pair: &SteklovPair, prec: Preconditioner) -> Result<Box<dyn LinearMap>> {
    Ok(match prec {
        Preconditioner::Identity => Box::new(Diagonal::identity(pair.dim())),
        Preconditioner::Jacobi => {
            let d = pair.operator().diagonal();
            if let Some(j) = d.iter().position(|v| !(*v > 0.0)) {
                return Err(Error::InvalidCase(format!(
                    "Jacobi diagonal entry {j} is not positive"
                )));
            }
            Box::new(Diagonal(d).inverse())
        }
        Preconditioner::Sd => Box::new(CholeskyInverse::new(&pair.s_d)?),
    })
}

pub fn run_comparison(
    case: &CauchyCase,
    pair: &SteklovPair,
    method: &Method,
) -> Result<Comparison> {
    let reference = analytic_trace(case);
    let a = pair.operator();
    let mut out = Comparison {
        u_r: Vec::new(),
        error: 0.0,
        iterates: Vec::new(),
        iterate_errors: Vec::new(),
        trace: None,
        natural: Vec::new(),
        euclid: Vec::new(),
        ritz: None,
    };
    match method {
        Method::Tsvd { eps_sigma } => out.u_r = tsvd_solve(&a, &pair.b_d, *eps_sigma)?,
        Method::Direct { reg, lambda } => {
            let op = a.add_scaled(*lambda, &regularizer(pair, *reg))?;
            out.u_r = Cholesky::new(&op)?.solve(&pair.b_d);
        }
        Method::Cg {
            prec,
            reg,
            lambda,
            cfg,
        } => {
            let r = regularizer(pair, *reg);
            let n = pair.dim();
            let sys = TikhonovSystem::new(&a, &r, pair.b_d.clone(), vec![0.0; n], *lambda)?;
            let m_inv = preconditioner_inverse(pair, *prec)?;
            let want_ritz = *prec == Preconditioner::Sd && *reg == Regularizer::Sd;
            let mut cfg = cfg.clone();
            cfg.store_vectors = true;
            let solved = solve_regularized(
                &sys,
                m_inv.as_ref(),
                &vec![0.0; n],
                &cfg,
                &AugmentationBasis::empty(n),
                want_ritz,
            )?;
            let trace = solved.result.trace;
            let op = a.add_scaled(*lambda, &r)?;
            out.iterates = iterates(&trace);
            let mut drop = 0.0;
            for (i, rec) in trace.records.iter().enumerate() {
                drop += rec.energy_decrement;
                out.natural.push(NaturalPoint {
                    i: i + 1,
                    err_offset: -drop,
                    mnorm_sq: rec.corr_mnorm_sq,
                });
            }
            for (i, x) in out.iterates.iter().enumerate() {
                let res = sub(&pair.b_d, &op.matvec(x));
                let d = sub(x, &trace.x0);
                out.euclid.push(EuclidPoint {
                    i,
                    residual_sq: dot(&res, &res),
                    norm_sq: dot(&d, &d),
                });
            }
            out.iterate_errors = out
                .iterates
                .iter()
                .map(|x| relative_error(x, &reference))
                .collect();
            out.u_r = solved.result.x;
            out.ritz = solved.ritz;
            out.trace = Some(trace);
        }
    }
    out.error = relative_error(&out.u_r, &reference);
    Ok(out)
}

fn iterates(trace: &SolveTrace) -> Vec<Vec<f64>> {
    let mut x = trace.x0.clone();
    let mut out = vec![x.clone()];
    if let Some(ws) = &trace.w_store {
        for (rec, w) in trace.records.iter().zip(ws) {
            axpy(rec.alpha, w, &mut x);
            out.push(x.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for p in [
            Preconditioner::Identity,
            Preconditioner::Jacobi,
            Preconditioner::Sd,
        ] {
            assert_eq!(p.to_string().parse::<Preconditioner>().unwrap(), p);
        }
        for r in [Regularizer::Identity, Regularizer::Sd] {
            assert_eq!(r.to_string().parse::<Regularizer>().unwrap(), r);
        }
        assert!("kmf".parse::<Preconditioner>().is_err());
    }
}
