//! Run directories: `manifest.json`, CSV tables and `plots/`.

use crate::suite::OracleValue;
use anyhow::{Context, Result};
use pointhom::table::Table;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything recorded about one run. Apart from `timings`, the serialized
/// form is a pure function of the inputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub scenario_sha256: Option<String>,
    pub seeds: Vec<u64>,
    pub flags: BTreeMap<String, Value>,
    pub outputs: Vec<String>,
    pub oracles: Vec<OracleValue>,
    /// Criterion ids whose check failed.
    pub flagged: Vec<u8>,
    pub results: BTreeMap<String, Value>,
    pub timings: BTreeMap<String, f64>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            tool: "pointhom",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            scenario_sha256: None,
            seeds: Vec::new(),
            flags: BTreeMap::new(),
            outputs: Vec::new(),
            oracles: Vec::new(),
            flagged: Vec::new(),
            results: BTreeMap::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// One output directory, created on first use.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl RunDir {
    pub fn create(root: impl AsRef<Path>, manifest: Manifest) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        std::fs::create_dir_all(root.join("plots"))
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self { root, manifest })
    }

    pub fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        let path = self.root.join(name);
        t.write(&path).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    /// Whitespace-separated two-column data under `plots/`.
    pub fn plot(&mut self, name: &str, xlabel: &str, ylabel: &str, pts: &[(f64, f64)]) -> Result<()> {
        let mut text = format!("# {xlabel} {ylabel}\n");
        for (x, y) in pts {
            text.push_str(&format!("{x:.16e} {y:.16e}\n"));
        }
        let rel = format!("plots/{name}");
        let path = self.root.join(&rel);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(rel);
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf> {
        let path = self.root.join("manifest.json");
        std::fs::write(&path, self.manifest.to_json()).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn creates_missing_directory() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("a/b");
        let mut run = RunDir::create(&root, Manifest::new("test")).unwrap();
        run.plot("p.dat", "x", "y", &[(1.0, 2.0)]).unwrap();
        run.finish().unwrap();
        assert!(root.join("manifest.json").exists());
        let p = std::fs::read_to_string(root.join("plots/p.dat")).unwrap();
        assert_eq!(p.lines().count(), 2);
    }
}
