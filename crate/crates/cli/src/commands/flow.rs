use regkrylov::csv::{fmt_f64, Table};
use regkrylov::linalg::DenseMatrix;
use regkrylov::pcg::SolveConfig;
use regkrylov::ritz::{
    lcurve_table, picard_csv, picard_table, ritz_lcurve, RitzSet, PICARD_SMOOTH_WIDTH,
};
use regkrylov::tikhonov::{multi_lambda_outer, LambdaFamily, Truncation};
use regkrylov_flow::gn::{coarse_to_fine, ritz_at, solve_level, split_flow, LevelReport};
use regkrylov_flow::image::strain_xx;
use regkrylov_flow::{FlowConfig, FlowLevel, FlowPreconditioner, Image};

use super::{read_input, Outputs};
use crate::args::{FlowArgs, FlowPrec, TruncationArg};
use crate::manifest::RunManifest;
use crate::pgm::{decode, encode, Pgm};
use crate::{Error, Result};

fn load_image(path: &std::path::Path) -> Result<Image> {
    let pgm = decode(&read_input(path)?).map_err(|source| Error::Pgm {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Image::new(pgm.width, pgm.height, pgm.to_gray())?)
}

/// Strain display range: mean ± 3 standard deviations.
pub fn strain_pgm(ux: &Image) -> Pgm {
    let s = strain_xx(ux);
    let (m, sd) = (s.mean(), s.std_dev());
    Pgm::quantize(
        s.width(),
        s.height(),
        s.values(),
        m - 3.0 * sd,
        m + 3.0 * sd,
        u16::MAX,
    )
}

fn write_flow(out: &mut Outputs, prefix: &str, level: &FlowLevel, u: &[f64]) -> Result<()> {
    let (ux, uy) = split_flow(&level.i1, u);
    let (w, h) = (ux.width(), ux.height());
    out.matrix(
        &format!("{prefix}flow_x.csv"),
        &DenseMatrix::from_row_major(h, w, ux.values().to_vec())?,
    )?;
    out.matrix(
        &format!("{prefix}flow_y.csv"),
        &DenseMatrix::from_row_major(h, w, uy.values().to_vec())?,
    )?;
    let bytes = encode(&strain_pgm(&ux)).expect("quantized samples fit");
    out.write(&format!("{prefix}strain_xx.pgm"), &bytes)
}

pub fn run(args: &FlowArgs, mut out: Outputs) -> Result<RunManifest> {
    let i1 = load_image(&args.img1)?;
    let i2 = load_image(&args.img2)?;
    if !i1.same_shape(&i2) {
        return Err(Error::Usage(format!(
            "frames differ in size: {}x{} and {}x{}",
            i1.width(),
            i1.height(),
            i2.width(),
            i2.height()
        )));
    }
    let cfg = FlowConfig {
        lambda: args.lambda,
        solve: SolveConfig {
            eps: args.eps,
            max_iter: args.max_iter,
            criteria: args.criterion.criteria(),
            ..Default::default()
        },
        preconditioner: match args.prec {
            FlowPrec::Regularization => FlowPreconditioner::Regularization,
            FlowPrec::Jacobi => FlowPreconditioner::Jacobi,
        },
        median_width: args.median,
        outer_max: args.outer_max,
        outer_tol: args.outer_tol,
        levels: args.levels.0,
        recycle: args.recycle,
    };
    cfg.validate()?;
    if !args.lambdas.is_empty() && cfg.preconditioner != FlowPreconditioner::Regularization {
        return Err(Error::Usage(
            "multi-λ runs need the regularization preconditioner".into(),
        ));
    }
    let (level, u0, mut reports) = coarse_to_fine(&i1, &i2, &cfg)?;
    let mut failure = None;
    let ritz: Option<RitzSet>;
    if args.lambdas.is_empty() {
        let (u, report) = solve_level(&level, u0, &cfg)?;
        reports.push(report);
        write_flow(&mut out, "", &level, &u)?;
        ritz = Some(ritz_at(&level, &u, &cfg)?);
    } else {
        let family = LambdaFamily::new(args.lambda, args.lambdas.clone())?;
        let truncation = match args.truncation {
            TruncationArg::Full => Truncation::Full,
            TruncationArg::Corner => Truncation::Corner,
        };
        let solve = SolveConfig {
            reorthogonalize: true,
            ..cfg.solve.clone()
        };
        let outcome = multi_lambda_outer(&level, &family, &u0, &solve, cfg.outer_max, truncation)?;
        reports.push(LevelReport {
            width: level.i1.width(),
            height: level.i1.height(),
            outer: outcome.completed,
            inner: outcome.inner_iterations.clone(),
            converged: outcome.error.is_none(),
        });
        for (k, (lambda, u)) in outcome.states.iter().enumerate() {
            let prefix = if k == 0 {
                String::new()
            } else {
                format!("lambda_{lambda}/")
            };
            write_flow(&mut out, &prefix, &level, u)?;
        }
        ritz = outcome.last_ritz;
        failure = outcome.error;
    }

    let mut levels = Table::new(&["width", "height", "outer", "inner_total", "converged"]);
    for r in &reports {
        levels.push(vec![
            r.width.to_string(),
            r.height.to_string(),
            r.outer.to_string(),
            r.inner.iter().sum::<usize>().to_string(),
            r.converged.to_string(),
        ]);
    }
    out.table("levels.csv", &levels)?;
    if let Some(ritz) = ritz.filter(|r| !r.is_empty()) {
        out.table(
            "lcurve.csv",
            &lcurve_table(&ritz_lcurve(&ritz, args.lambda)?),
        )?;
        out.table(
            "picard.csv",
            &picard_csv(&picard_table(&ritz, args.lambda, PICARD_SMOOTH_WIDTH)),
        )?;
    }
    out.manifest_mut().result("levels", reports.len());
    out.manifest_mut().result(
        "inner_total",
        fmt_f64(reports.iter().flat_map(|r| &r.inner).sum::<usize>() as f64),
    );
    let manifest = out.finish()?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(manifest),
    }
}
