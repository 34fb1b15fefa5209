//! Command-line driver: argument parsing, run manifests, PGM and CSV output.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 for usage and
//! input errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod manifest;
pub mod pgm;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use args::{Cli, Command};
pub use manifest::RunManifest;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Pgm {
        path: PathBuf,
        source: pgm::PgmError,
    },
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] regkrylov::Error),
    #[error(transparent)]
    Steklov(#[from] regkrylov_steklov::Error),
    #[error(transparent)]
    Flow(#[from] regkrylov_flow::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub const EXIT_OK: u8 = 0;
pub const EXIT_NUMERICAL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

impl Error {
    pub fn exit_code(&self) -> u8 {
        use regkrylov::Error as Core;
        match self {
            Self::Usage(_) | Self::Input { .. } | Self::Pgm { .. } => EXIT_USAGE,
            Self::Core(
                Core::InvalidConfig(_) | Core::Format { .. } | Core::DimensionMismatch { .. },
            ) => EXIT_USAGE,
            Self::Steklov(regkrylov_steklov::Error::InvalidCase(_)) => EXIT_USAGE,
            Self::Flow(regkrylov_flow::Error::Config(_) | regkrylov_flow::Error::Shape(_)) => {
                EXIT_USAGE
            }
            Self::Output { .. } | Self::Core(_) | Self::Steklov(_) | Self::Flow(_) => {
                EXIT_NUMERICAL
            }
        }
    }
}

/// Parses `argv` (program name first) into the command and its manifest.
pub fn parse_cli<I, T>(argv: I) -> std::result::Result<(Cli, RunManifest), clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let manifest = cli.command.manifest();
    Ok((cli, manifest))
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Runs a parsed command; the returned manifest has been written as
/// `run.json` in the output directory.
pub fn execute(command: &Command) -> Result<RunManifest> {
    commands::dispatch(command)
}

/// Full entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    match execute(&cli.command) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
