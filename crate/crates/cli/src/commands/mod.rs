//! One module per subcommand; every output goes through [`Outputs`] so that
//! its checksum lands in the manifest.

mod datacomp;
mod flow;
mod solve;
mod sweep;
mod synth;

use std::fs;
use std::path::{Path, PathBuf};

use regkrylov::csv::{write_matrix, Table};
use regkrylov::linalg::DenseMatrix;
use regkrylov::ritz::RitzSet;
use serde::{Deserialize, Serialize};

use crate::args::Command;
use crate::manifest::RunManifest;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "run.json";
pub const RITZ_FILE: &str = "ritz.json";

/// Ritz pairs with the starting point they expand around.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedRitz {
    pub ritz: RitzSet,
    pub x0: Vec<f64>,
}

/// Output directory of one run.
pub struct Outputs {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Outputs {
    pub fn create(dir: &Path, manifest: RunManifest) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| Error::Output {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn manifest_mut(&mut self) -> &mut RunManifest {
        &mut self.manifest
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| Error::Output {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        fs::write(&path, bytes).map_err(|source| Error::Output { path, source })?;
        self.manifest.checksum(rel, bytes);
        Ok(())
    }

    pub fn table(&mut self, rel: &str, table: &Table) -> Result<()> {
        let mut buf = Vec::new();
        table.write_to(&mut buf)?;
        self.write(rel, &buf)
    }

    pub fn matrix(&mut self, rel: &str, m: &DenseMatrix) -> Result<()> {
        let mut buf = Vec::new();
        write_matrix(m, &mut buf)?;
        self.write(rel, &buf)
    }

    pub fn vector(&mut self, rel: &str, v: &[f64]) -> Result<()> {
        self.matrix(rel, &DenseMatrix::from_row_major(v.len(), 1, v.to_vec())?)
    }

    pub fn ritz(&mut self, saved: &SavedRitz) -> Result<()> {
        let text = serde_json::to_string(saved).expect("Ritz pairs serialize");
        self.write(RITZ_FILE, text.as_bytes())
    }

    /// Writes the manifest last, with every checksum in it.
    pub fn finish(self) -> Result<RunManifest> {
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, self.manifest.to_json())
            .map_err(|source| Error::Output { path, source })?;
        Ok(self.manifest)
    }
}

pub fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Input {
        path: path.to_path_buf(),
        source,
    })
}

pub fn dispatch(command: &Command) -> Result<RunManifest> {
    let manifest = command.manifest();
    let out = Outputs::create(command.out(), manifest);
    match command {
        Command::Solve(a) => solve::run(a, out?),
        Command::Datacomp(a) => datacomp::run(a, out?),
        Command::Opticalflow(a) => flow::run(a, out?),
        Command::Sweep(a) => sweep::run(a, out?),
        Command::Synth(a) => synth::run(a, out?),
        Command::Replay(a) => replay(&a.manifest, &a.out),
    }
}

/// Re-runs the command recorded in a manifest into `out`.
pub fn replay(manifest: &Path, out: &Path) -> Result<RunManifest> {
    let text = String::from_utf8(read_input(manifest)?)
        .map_err(|_| Error::Usage(format!("{} is not UTF-8", manifest.display())))?;
    let recorded = RunManifest::from_json(&text)?;
    if recorded.command() == Some("replay") {
        return Err(Error::Usage("a replay manifest cannot be replayed".into()));
    }
    let mut argv = vec!["regkrylov".to_string()];
    argv.extend(recorded.to_argv()?);
    argv.push("--out".into());
    argv.push(out.display().to_string());
    let (cli, _) = crate::parse_cli(argv)
        .map_err(|e| Error::Usage(format!("manifest does not parse: {e}")))?;
    dispatch(&cli.command)
}
