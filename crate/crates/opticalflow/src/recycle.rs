//! Ritz recycling across a batch of solves sharing `A + λM`.
//!
//! The first solve runs with the constant-flow basis only; its Ritz pairs
//! are then appended to the basis in growing numbers and a fixed batch of
//! fresh right-hand sides is solved again for every basis size.

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regkrylov::augmentation::recycle;
use regkrylov::csv::{fmt_f64, Table};
use regkrylov::pcg::{Criteria, SolveConfig};

use crate::gn::{FlowLevel, FlowPreconditioner};
use crate::image::Image;
use crate::synth::Speckle;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RecycleConfig {
    pub width: usize,
    pub height: usize,
    pub lambda: f64,
    /// Relative tolerance; the batch stops at `eps ‖r_0‖_{M⁻¹}` of the first solve.
    pub eps: f64,
    pub max_iter: usize,
    /// Right-hand sides per basis size.
    pub solves: usize,
    /// Number of basis sizes between none and every trusted Ritz vector.
    pub steps: usize,
    /// Peak of the random deformations, in pixels.
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for RecycleConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            lambda: 1000.0,
            eps: 1e-6,
            max_iter: 2000,
            solves: 8,
            steps: 5,
            amplitude: 0.5,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecycleRow {
    /// Ritz vectors appended to the constant-flow basis.
    pub size: usize,
    /// Inner iterations of each solve of the batch.
    pub iterations: Vec<usize>,
}

impl RecycleRow {
    pub fn total(&self) -> usize {
        self.iterations.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecycleReport {
    /// Iterations of the seeding solve.
    pub seed_iterations: usize,
    pub rows: Vec<RecycleRow>,
}

impl RecycleReport {
    /// Totals never increase with the basis size.
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].total() <= w[0].total())
    }

    /// `1 − total(full) / total(none)`
    pub fn reduction(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) if a.total() > 0 => 1.0 - b.total() as f64 / a.total() as f64,
            _ => 0.0,
        }
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["size", "total", "mean"]);
        for r in &self.rows {
            let mean = r.total() as f64 / r.iterations.len().max(1) as f64;
            t.push(vec![
                r.size.to_string(),
                r.total().to_string(),
                fmt_f64(mean),
            ]);
        }
        t
    }
}

/// Smooth random field: a few low-frequency sinusoids scaled to `amplitude`.
fn smooth_field(
    rng: &mut ChaCha8Rng,
    width: usize,
    height: usize,
    amplitude: f64,
) -> impl Fn(f64, f64) -> f64 {
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            let kx = rng.gen_range(0.5..2.0) * std::f64::consts::TAU / width as f64;
            let ky = rng.gen_range(0.5..2.0) * std::f64::consts::TAU / height as f64;
            (
                kx,
                ky,
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect();
    let norm: f64 = waves
        .iter()
        .map(|w| w.3.abs())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    move |x, y| {
        amplitude / norm
            * waves
                .iter()
                .map(|(kx, ky, p, a)| a * (kx * x + ky * y + p).sin())
                .sum::<f64>()
    }
}

/// Second frames of the batch, the first one seeding the Ritz pairs.
pub fn deformed_frames(speckle: &Speckle, cfg: &RecycleConfig) -> Vec<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    (0..=cfg.solves)
        .map(|_| {
            let fx = smooth_field(&mut rng, cfg.width, cfg.height, cfg.amplitude);
            let fy = smooth_field(&mut rng, cfg.width, cfg.height, cfg.amplitude);
            speckle.render_with(|x, y| (fx(x, y), fy(x, y)))
        })
        .collect()
}

pub fn run_recycling(cfg: &RecycleConfig) -> Result<RecycleReport> {
    if cfg.solves == 0 || cfg.steps == 0 {
        return Err(Error::Config(
            "recycling needs at least one solve and one step".into(),
        ));
    }
    let speckle = Speckle::standard(cfg.width, cfg.height, cfg.seed);
    let frames = deformed_frames(&speckle, cfg);
    let level = FlowLevel::new(speckle.render(0.0, 0.0), frames[0].clone(), 1)?;
    let u = vec![0.0; level.dim()];
    let kernel = level.kernel_basis(cfg.lambda)?;
    let seed_cfg = SolveConfig {
        eps: cfg.eps,
        max_iter: cfg.max_iter,
        criteria: Criteria::RESIDUAL_RATIO,
        reorthogonalize: true,
        ..Default::default()
    };
    let prec = FlowPreconditioner::Regularization;
    let seeded = level.step(&u, cfg.lambda, &seed_cfg, prec, &kernel, true)?;
    let ritz = seeded
        .solve
        .ritz
        .ok_or_else(|| Error::Config("seeding solve produced no Ritz pairs".into()))?;
    let av = seeded.solve.av.expect("images come with the Ritz pairs");
    let seed_trace = &seeded.solve.result.trace;
    let floor = cfg.eps * seed_trace.gammas.first().copied().unwrap_or(0.0).sqrt();
    info!(
        "seeding solve: {} iterations, {} trusted Ritz pairs",
        seed_trace.m(),
        ritz.valid
    );

    // every batch solve stops at the same absolute residual
    let batch_cfg = SolveConfig {
        eps: cfg.eps,
        max_iter: cfg.max_iter,
        criteria: Criteria::default(),
        abs_floor: floor,
        ..Default::default()
    };
    let full = ritz.valid;
    let mut sizes: Vec<usize> = (0..=cfg.steps).map(|k| k * full / cfg.steps).collect();
    sizes.dedup();
    let mut rows = Vec::new();
    for size in sizes {
        let basis = recycle(&kernel, &ritz, &av, size)?;
        let mut iterations = Vec::with_capacity(cfg.solves);
        for frame in &frames[1..] {
            let lvl = FlowLevel {
                i2: frame.clone(),
                ..level.clone()
            };
            let out = lvl.step(&u, cfg.lambda, &batch_cfg, prec, &basis, false)?;
            iterations.push(out.solve.result.trace.m());
        }
        info!("recycled {size}: iterations {iterations:?}");
        rows.push(RecycleRow { size, iterations });
    }
    Ok(RecycleReport {
        seed_iterations: seed_trace.m(),
        rows,
    })
}
