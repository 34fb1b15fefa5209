//! Command-line surface.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use regkrylov::pcg::Criteria;

use crate::manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(
    name = "regkrylov",
    version,
    about = "Regularized Krylov solvers and their experiments"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Regularized solve of a system given as CSV matrices.
    Solve(SolveArgs),
    /// Cauchy data completion on the unit square.
    Datacomp(DatacompArgs),
    /// Optical flow between two PGM frames.
    Opticalflow(FlowArgs),
    /// Reconstructions over a λ grid from saved Ritz pairs.
    Sweep(SweepArgs),
    /// Speckle frame pair under a known translation.
    Synth(SynthArgs),
    /// Re-run the command recorded in a run.json.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Solve(_) => "solve",
            Self::Datacomp(_) => "datacomp",
            Self::Opticalflow(_) => "opticalflow",
            Self::Sweep(_) => "sweep",
            Self::Synth(_) => "synth",
            Self::Replay(_) => "replay",
        }
    }

    pub fn out(&self) -> &PathBuf {
        match self {
            Self::Solve(a) => &a.out,
            Self::Datacomp(a) => &a.out,
            Self::Opticalflow(a) => &a.out,
            Self::Sweep(a) => &a.out,
            Self::Synth(a) => &a.out,
            Self::Replay(a) => &a.out,
        }
    }

    /// Manifest with every resolved parameter.
    pub fn manifest(&self) -> RunManifest {
        let mut m = RunManifest::new(self.name());
        match self {
            Self::Solve(a) => a.record(&mut m),
            Self::Datacomp(a) => a.record(&mut m),
            Self::Opticalflow(a) => a.record(&mut m),
            Self::Sweep(a) => a.record(&mut m),
            Self::Synth(a) => a.record(&mut m),
            Self::Replay(a) => m.param("manifest", a.manifest.display()),
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    /// `‖r_i‖ < ε ‖r_0‖` in the preconditioned norm.
    Residual,
    /// Residual against `‖T_i‖_F ‖x_i − x_0‖_M`.
    Minres,
    /// Energy decrements below `ε²`.
    Stagnation,
}

impl CriterionArg {
    pub fn criteria(self) -> Criteria {
        match self {
            Self::Residual => Criteria::RESIDUAL_RATIO,
            Self::Minres => Criteria::MINRES_STYLE,
            Self::Stagnation => Criteria::STAGNATION,
        }
    }
}

fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Operator A, one row per line.
    #[arg(long)]
    pub a: PathBuf,
    /// Regularizer M, one row per line.
    #[arg(long)]
    pub m: PathBuf,
    /// Right-hand side b_A, one value per line.
    #[arg(long)]
    pub b_a: PathBuf,
    /// Right-hand side b_M; zero when omitted.
    #[arg(long)]
    pub b_m: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = SolvePrec::M)]
    pub prec: SolvePrec,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = CriterionArg::Residual)]
    pub criterion: CriterionArg,
    /// Reorthogonalize the preconditioned residuals.
    #[arg(long)]
    pub reorth: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolvePrec {
    /// The regularizer itself; Ritz pairs are extracted.
    M,
    Jacobi,
    Identity,
}

impl SolveArgs {
    fn record(&self, m: &mut RunManifest) {
        m.param("a", self.a.display());
        m.param("m", self.m.display());
        m.param("b-a", self.b_a.display());
        if let Some(p) = &self.b_m {
            m.param("b-m", p.display());
        }
        m.param("lambda", self.lambda);
        m.param("prec", value_name(&self.prec));
        m.param("eps", self.eps);
        m.param("max-iter", self.max_iter);
        m.param("criterion", value_name(&self.criterion));
        m.param("reorth", self.reorth);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DatacompMethod {
    Cg,
    Tsvd,
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DatacompPrec {
    Sd,
    Jacobi,
    Id,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DatacompReg {
    Sd,
    Id,
}

#[derive(Debug, Args)]
pub struct DatacompArgs {
    /// Elements per side.
    #[arg(long, default_value_t = 40)]
    pub nel: usize,
    /// Frequency of the left Dirichlet data sin(kπy/H).
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    /// Signal-to-noise ratio of the left data in dB; `inf` for none.
    #[arg(long, default_value_t = 10.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub height: f64,
    #[arg(long, default_value_t = 1.0)]
    pub width: f64,
    #[arg(long, value_enum, default_value_t = DatacompMethod::Cg)]
    pub method: DatacompMethod,
    #[arg(long, value_enum, default_value_t = DatacompPrec::Sd)]
    pub prec: DatacompPrec,
    #[arg(long, value_enum, default_value_t = DatacompReg::Sd)]
    pub reg: DatacompReg,
    #[arg(long, default_value_t = 1e-9)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub eps: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = CriterionArg::Minres)]
    pub criterion: CriterionArg,
    /// Relative singular value cut of the truncated spectral solve.
    #[arg(long, default_value_t = 1e-12)]
    pub eps_sigma: f64,
    /// Plain recurrences: the Ritz pairs lose orthogonality as soon as the
    /// leading ones converge.
    #[arg(long)]
    pub no_reorth: bool,
    #[arg(long)]
    pub out: PathBuf,
}

impl DatacompArgs {
    fn record(&self, m: &mut RunManifest) {
        m.param("nel", self.nel);
        m.param("k", self.k);
        m.param("snr", self.snr);
        m.param("seed", self.seed);
        m.param("height", self.height);
        m.param("width", self.width);
        m.param("method", value_name(&self.method));
        m.param("prec", value_name(&self.prec));
        m.param("reg", value_name(&self.reg));
        m.param("lambda", self.lambda);
        m.param("eps", self.eps);
        m.param("max-iter", self.max_iter);
        m.param("criterion", value_name(&self.criterion));
        m.param("eps-sigma", self.eps_sigma);
        m.param("no-reorth", self.no_reorth);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FlowPrec {
    Regularization,
    Jacobi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TruncationArg {
    Full,
    Corner,
}

/// Pyramid depth: `auto` or a positive level count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Levels(pub Option<usize>);

impl FromStr for Levels {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Self(None));
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Self(Some(n))),
            _ => Err(format!("expected `auto` or a positive integer, got {s:?}")),
        }
    }
}

impl fmt::Display for Levels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            None => f.write_str("auto"),
            Some(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    /// Reference frame (binary PGM).
    #[arg(long)]
    pub img1: PathBuf,
    /// Deformed frame (binary PGM).
    #[arg(long)]
    pub img2: PathBuf,
    /// Weight of the solved system.
    #[arg(long, default_value_t = 1000.0)]
    pub lambda: f64,
    /// Further weights reconstructed from the Ritz pairs on the finest level;
    /// the solves of such runs are reorthogonalized.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Vec<f64>,
    #[arg(long, value_enum, default_value_t = TruncationArg::Corner)]
    pub truncation: TruncationArg,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = CriterionArg::Minres)]
    pub criterion: CriterionArg,
    /// Pyramid depth, `auto` or a count.
    #[arg(long, default_value = "auto")]
    pub levels: Levels,
    /// Fraction of Ritz vectors carried between Gauss–Newton steps.
    #[arg(long, default_value_t = 0.0)]
    pub recycle: f64,
    #[arg(long, value_enum, default_value_t = FlowPrec::Regularization)]
    pub prec: FlowPrec,
    /// Odd width of the median filter on increments.
    #[arg(long, default_value_t = 3)]
    pub median: usize,
    #[arg(long, default_value_t = 20)]
    pub outer_max: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub outer_tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

impl FlowArgs {
    fn record(&self, m: &mut RunManifest) {
        m.param("img1", self.img1.display());
        m.param("img2", self.img2.display());
        m.param("lambda", self.lambda);
        if !self.lambdas.is_empty() {
            m.param("lambdas", join(&self.lambdas));
        }
        m.param("truncation", value_name(&self.truncation));
        m.param("eps", self.eps);
        m.param("max-iter", self.max_iter);
        m.param("criterion", value_name(&self.criterion));
        m.param("levels", self.levels);
        m.param("recycle", self.recycle);
        m.param("prec", value_name(&self.prec));
        m.param("median", self.median);
        m.param("outer-max", self.outer_max);
        m.param("outer-tol", self.outer_tol);
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `ritz.json` written by `solve` or `datacomp`.
    #[arg(long)]
    pub ritz: PathBuf,
    /// Weights to reconstruct.
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

impl SweepArgs {
    fn record(&self, m: &mut RunManifest) {
        m.param("ritz", self.ritz.display());
        m.param("grid", join(&self.grid));
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
    pub tx: f64,
    #[arg(long, default_value_t = -0.2, allow_negative_numbers = true)]
    pub ty: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Bits per sample of the written frames, 8 or 16.
    #[arg(long, default_value_t = 16, value_parser = clap::builder::TypedValueParser::map(clap::builder::PossibleValuesParser::new(["8", "16"]), |s: String| s.parse::<u8>().expect("listed")))]
    pub bits: u8,
    #[arg(long)]
    pub out: PathBuf,
}

impl SynthArgs {
    fn record(&self, m: &mut RunManifest) {
        m.param("width", self.width);
        m.param("height", self.height);
        m.param("tx", self.tx);
        m.param("ty", self.ty);
        m.param("seed", self.seed);
        m.param("bits", self.bits);
    }
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A run.json from an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
