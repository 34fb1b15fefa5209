//! `run.json`: a flat, key-sorted record of a run.
//!
//! Keys are grouped by prefix: `param.<flag>` holds every resolved command
//! line value, `checksum.<file>` the SHA-256 of each output, `result.<name>`
//! scalar outcomes. The `param.` entries alone determine the outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const PARAM: &str = "param.";
pub const CHECKSUM: &str = "checksum.";
pub const RESULT: &str = "result.";

/// Generator behind every seeded draw, recorded so that seeds stay meaningful.
pub const RNG: &str = "ChaCha8 stream cipher (rand_chacha 0.3) seeded with seed_from_u64; normals by ziggurat (rand_distr 0.4)";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunManifest {
    entries: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.set("command", command);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m.set("rng", RNG);
        m
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn param(&mut self, flag: &str, value: impl ToString) {
        self.set(&format!("{PARAM}{flag}"), value);
    }

    pub fn result(&mut self, name: &str, value: impl ToString) {
        self.set(&format!("{RESULT}{name}"), value);
    }

    pub fn checksum(&mut self, file: &str, bytes: &[u8]) {
        self.set(&format!("{CHECKSUM}{file}"), sha256_hex(bytes));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn command(&self) -> Option<&str> {
        self.get("command")
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    /// Entries under `prefix`, with the prefix removed.
    pub fn with_prefix<'a>(
        &'a self,
        prefix: &'a str,
    ) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.entries
            .iter()
            .filter_map(move |(k, v)| k.strip_prefix(prefix).map(|k| (k, v.as_str())))
    }

    /// Command and parameters only; two runs with equal inputs compare equal.
    pub fn inputs(&self) -> BTreeMap<&str, &str> {
        self.entries
            .iter()
            .filter(|(k, _)| !k.starts_with(CHECKSUM) && !k.starts_with(RESULT))
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect()
    }

    /// Command line reproducing the run, without `--out`.
    pub fn to_argv(&self) -> Result<Vec<String>> {
        let command = self
            .command()
            .ok_or_else(|| Error::Usage("manifest has no command".into()))?;
        let mut argv = vec![command.to_string()];
        for (flag, value) in self.with_prefix(PARAM) {
            match value {
                "true" => argv.push(format!("--{flag}")),
                "false" => {}
                _ => {
                    argv.push(format!("--{flag}"));
                    argv.push(value.to_string());
                }
            }
        }
        Ok(argv)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.entries).expect("string map serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: BTreeMap<String, String> = serde_json::from_str(text)
            .map_err(|e| Error::Usage(format!("invalid manifest: {e}")))?;
        Ok(Self { entries })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_keeps_key_order() {
        let mut m = RunManifest::new("datacomp");
        m.param("nel", 40);
        m.param("lambda", 1e-9);
        m.checksum("u_R.csv", b"abc");
        let text = m.to_json();
        assert!(text.find("\"command\"").unwrap() < text.find("\"param.lambda\"").unwrap());
        assert!(text.find("\"param.lambda\"").unwrap() < text.find("\"param.nel\"").unwrap());
        assert_eq!(RunManifest::from_json(&text).unwrap(), m);
        assert_eq!(
            m.get("checksum.u_R.csv"),
            Some("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
        );
    }

    #[test]
    fn argv_from_params() {
        let mut m = RunManifest::new("solve");
        m.param("reorth", true);
        m.param("ritz", false);
        m.param("eps", 1e-8);
        assert_eq!(
            m.to_argv().unwrap(),
            vec!["solve", "--eps", "0.00000001", "--reorth"]
        );
    }
}
