use regkrylov::csv::{fmt_f64, Table};
use regkrylov::tikhonov::{lambda_sweep, sweep_table};

use super::{read_input, Outputs, SavedRitz};
use crate::args::SweepArgs;
use crate::manifest::RunManifest;
use crate::{Error, Result};

pub fn run(args: &SweepArgs, mut out: Outputs) -> Result<RunManifest> {
    let saved: SavedRitz = serde_json::from_slice(&read_input(&args.ritz)?).map_err(|e| {
        Error::Usage(format!(
            "{}: not a saved Ritz set: {e}",
            args.ritz.display()
        ))
    })?;
    if !saved.ritz.is_empty() && saved.ritz.dim() != saved.x0.len() {
        return Err(Error::Usage(format!(
            "{}: starting point does not match the Ritz vectors",
            args.ritz.display()
        )));
    }
    let points = lambda_sweep(&saved.ritz, &saved.x0, &args.grid)?;
    out.table("sweep.csv", &sweep_table(&points))?;
    // one column per weight
    let header: Vec<String> = points
        .iter()
        .map(|p| format!("lambda={}", p.lambda))
        .collect();
    let mut sol = Table::new(&header);
    for i in 0..saved.x0.len() {
        sol.push(points.iter().map(|p| fmt_f64(p.x[i])).collect());
    }
    out.table("solutions.csv", &sol)?;
    out.manifest_mut().result("ritz_pairs", saved.ritz.len());
    out.finish()
}
