use regkrylov::augmentation::AugmentationBasis;
use regkrylov::csv::read_matrix;
use regkrylov::operator::{CholeskyInverse, Diagonal};
use regkrylov::pcg::SolveConfig;
use regkrylov::ritz::{
    corner_index, lcurve_table, picard_csv, picard_table, ritz_lcurve, PICARD_SMOOTH_WIDTH,
};
use regkrylov::tikhonov::{solve_regularized, TikhonovSystem};
use regkrylov::LinearMap;

use super::{read_input, Outputs, SavedRitz};
use crate::args::{SolveArgs, SolvePrec};
use crate::manifest::RunManifest;
use crate::{Error, Result};

fn load_vector(path: &std::path::Path) -> Result<Vec<f64>> {
    let m = read_matrix(&read_input(path)?[..])?;
    if m.cols() != 1 {
        return Err(Error::Usage(format!(
            "{}: expected one value per line, found {} columns",
            path.display(),
            m.cols()
        )));
    }
    Ok(m.as_slice().to_vec())
}

pub fn run(args: &SolveArgs, mut out: Outputs) -> Result<RunManifest> {
    let a = read_matrix(&read_input(&args.a)?[..])?;
    let m = read_matrix(&read_input(&args.m)?[..])?;
    let b_a = load_vector(&args.b_a)?;
    let b_m = match &args.b_m {
        Some(p) => load_vector(p)?,
        None => vec![0.0; b_a.len()],
    };
    let n = a.rows();
    let sys = TikhonovSystem::new(&a, &m, b_a, b_m, args.lambda)?;
    let m_inv: Box<dyn LinearMap> = match args.prec {
        SolvePrec::M => Box::new(CholeskyInverse::new(&m)?),
        SolvePrec::Jacobi => {
            let d: Vec<f64> = a
                .diagonal()
                .iter()
                .zip(m.diagonal())
                .map(|(x, y)| x + args.lambda * y)
                .collect();
            if let Some(i) = d.iter().position(|v| !(*v > 0.0)) {
                return Err(Error::Usage(format!(
                    "diagonal of A + λM is not positive at entry {i}"
                )));
            }
            Box::new(Diagonal(d).inverse())
        }
        SolvePrec::Identity => Box::new(Diagonal::identity(n)),
    };
    let cfg = SolveConfig {
        eps: args.eps,
        max_iter: args.max_iter,
        criteria: args.criterion.criteria(),
        reorthogonalize: args.reorth,
        ..Default::default()
    };
    let want_ritz = args.prec == SolvePrec::M;
    let solved = solve_regularized(
        &sys,
        m_inv.as_ref(),
        &vec![0.0; n],
        &cfg,
        &AugmentationBasis::empty(n),
        want_ritz,
    )?;
    let trace = &solved.result.trace;
    out.vector("x.csv", &solved.result.x)?;
    out.table("trace.csv", &trace.to_table())?;
    if let Some(ritz) = &solved.ritz {
        out.table(
            "lcurve.csv",
            &lcurve_table(&ritz_lcurve(ritz, args.lambda)?),
        )?;
        out.table(
            "picard.csv",
            &picard_csv(&picard_table(ritz, args.lambda, PICARD_SMOOTH_WIDTH)),
        )?;
        out.ritz(&SavedRitz {
            ritz: ritz.clone(),
            x0: trace.x0.clone(),
        })?;
        out.manifest_mut().result("corner", corner_index(ritz));
        out.manifest_mut().result("ritz_valid", ritz.valid);
    }
    let mm = out.manifest_mut();
    mm.result("iterations", trace.m());
    mm.result("converged", trace.converged());
    mm.result("stop", format!("{:?}", trace.stop_reason));
    out.finish()
}
