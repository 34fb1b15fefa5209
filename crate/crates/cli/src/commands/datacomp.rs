use regkrylov::csv::{fmt_f64, Table};
use regkrylov::pcg::SolveConfig;
use regkrylov::ritz::{picard_csv, picard_table, PICARD_SMOOTH_WIDTH};
use regkrylov_steklov::compare::{run_comparison, Method, Preconditioner, Regularizer};
use regkrylov_steklov::{analytic_trace, assemble_case, CauchyCase};

use super::{Outputs, SavedRitz};
use crate::args::{DatacompArgs, DatacompMethod, DatacompPrec, DatacompReg};
use crate::manifest::RunManifest;
use crate::Result;

pub fn run(args: &DatacompArgs, mut out: Outputs) -> Result<RunManifest> {
    let case = CauchyCase {
        height: args.height,
        width: args.width,
        k: args.k,
        n_el: args.nel,
        snr_db: args.snr,
        seed: args.seed,
    };
    let pair = assemble_case(&case)?;
    let reg = match args.reg {
        DatacompReg::Sd => Regularizer::Sd,
        DatacompReg::Id => Regularizer::Identity,
    };
    let method = match args.method {
        DatacompMethod::Tsvd => Method::Tsvd {
            eps_sigma: args.eps_sigma,
        },
        DatacompMethod::Direct => Method::Direct {
            reg,
            lambda: args.lambda,
        },
        DatacompMethod::Cg => Method::Cg {
            prec: match args.prec {
                DatacompPrec::Sd => Preconditioner::Sd,
                DatacompPrec::Jacobi => Preconditioner::Jacobi,
                DatacompPrec::Id => Preconditioner::Identity,
            },
            reg,
            lambda: args.lambda,
            cfg: SolveConfig {
                eps: args.eps,
                max_iter: args.max_iter,
                criteria: args.criterion.criteria(),
                reorthogonalize: !args.no_reorth,
                ..Default::default()
            },
        },
    };
    let cmp = run_comparison(&case, &pair, &method)?;

    let reference = analytic_trace(&case);
    let mut u = Table::new(&["y", "u_R", "reference"]);
    for ((y, v), r) in case.trace_ordinates().iter().zip(&cmp.u_r).zip(&reference) {
        u.push_reals(&[*y, *v, *r]);
    }
    out.table("u_R.csv", &u)?;
    if let Some(trace) = &cmp.trace {
        out.table("trace.csv", &trace.to_table())?;
        let mut natural = Table::new(&["i", "err_offset", "mnorm_sq"]);
        for p in &cmp.natural {
            natural.push(vec![
                p.i.to_string(),
                fmt_f64(p.err_offset),
                fmt_f64(p.mnorm_sq),
            ]);
        }
        out.table("lcurve_natural.csv", &natural)?;
        let mut euclid = Table::new(&["i", "residual_sq", "norm_sq", "relative_error"]);
        for (p, e) in cmp.euclid.iter().zip(&cmp.iterate_errors) {
            euclid.push(vec![
                p.i.to_string(),
                fmt_f64(p.residual_sq),
                fmt_f64(p.norm_sq),
                fmt_f64(*e),
            ]);
        }
        out.table("lcurve_euclid.csv", &euclid)?;
        if let Some(ritz) = &cmp.ritz {
            out.table(
                "picard.csv",
                &picard_csv(&picard_table(ritz, args.lambda, PICARD_SMOOTH_WIDTH)),
            )?;
            out.ritz(&SavedRitz {
                ritz: ritz.clone(),
                x0: trace.x0.clone(),
            })?;
        }
        out.manifest_mut().result("iterations", trace.m());
    }
    out.manifest_mut()
        .result("relative_error", fmt_f64(cmp.error));
    out.finish()
}
