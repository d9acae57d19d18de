// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run directories, manifests, result tables and plots.
//!
//! Each invocation writes into `<root>/runs/<UTC timestamp>/`; the file
//! `<root>/latest` holds the name of the newest run directory.

pub mod svg;
pub mod tables;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::sha256_hex;

/// A file with its content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

impl FileEntry {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        })
    }
}

/// Provenance record written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: Vec<String>,
    pub checkpoint: Option<FileEntry>,
    /// Hash of the loaded tensors, equal to the checkpoint file hash.
    pub model_hash: String,
    pub model_config: serde_json::Value,
    pub datasets: BTreeMap<String, FileEntry>,
    pub seeds: BTreeMap<String, serde_json::Value>,
    pub config: serde_json::Value,
    pub stages: Vec<String>,
    /// Examples actually scored per stage (after subsampling and alignment).
    pub effective_n: BTreeMap<String, usize>,
    pub notes: Vec<String>,
    pub outputs: Vec<FileEntry>,
    pub stage_seconds: BTreeMap<String, f64>,
    pub units: String,
}

impl RunManifest {
    pub fn new(model_hash: String, model_config: serde_json::Value, config: serde_json::Value) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: std::env::args().collect(),
            checkpoint: None,
            model_hash,
            model_config,
            datasets: BTreeMap::new(),
            seeds: BTreeMap::new(),
            config,
            stages: Vec::new(),
            effective_n: BTreeMap::new(),
            notes: Vec::new(),
            outputs: Vec::new(),
            stage_seconds: BTreeMap::new(),
            units: "nats".into(),
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        Ok(v)
    }
}

/// A timestamped output directory.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    path: PathBuf,
    written: Vec<FileEntry>,
}

pub const LATEST: &str = "latest";
pub const MANIFEST: &str = "manifest.json";

impl RunDir {
    /// Creates `<root>/runs/<timestamp>` (with a numeric suffix if that name
    /// is taken).
    pub fn create(root: &Path) -> Result<Self> {
        let runs = root.join("runs");
        std::fs::create_dir_all(&runs).map_err(|e| Error::io(&runs, e))?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
        let mut path = runs.join(&stamp);
        let mut n = 1;
        while path.exists() {
            path = runs.join(format!("{stamp}-{n}"));
            n += 1;
        }
        std::fs::create_dir(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            path,
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn name(&self) -> String {
        self.path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    }

    /// Writes `bytes` to `name` inside the run directory and records its hash.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.path.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        self.written.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(p)
    }

    pub fn outputs(&self) -> &[FileEntry] {
        &self.written
    }

    /// Writes the manifest (with the output list filled in) and points
    /// `latest` at this run.
    pub fn finish(self, mut manifest: RunManifest) -> Result<(PathBuf, RunManifest)> {
        manifest.outputs = self.written.clone();
        let p = self.path.join(MANIFEST);
        std::fs::write(&p, manifest.to_json()?).map_err(|e| Error::io(&p, e))?;
        let latest = self.root.join(LATEST);
        std::fs::write(&latest, format!("runs/{}\n", self.name())).map_err(|e| Error::io(&latest, e))?;
        Ok((self.path, manifest))
    }
}

/// The run directory named by `<root>/latest`, if any.
pub fn latest_run(root: &Path) -> Option<PathBuf> {
    let text = std::fs::read_to_string(root.join(LATEST)).ok()?;
    let p = root.join(text.trim());
    p.is_dir().then_some(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_dirs_are_unique_and_latest_follows() {
        let root = tempfile::tempdir().unwrap();
        let mut a = RunDir::create(root.path()).unwrap();
        a.write("x.csv", b"a\n").unwrap();
        let b = RunDir::create(root.path()).unwrap();
        assert_ne!(a.path(), b.path());
        let m = RunManifest::new("h".into(), serde_json::json!({}), serde_json::json!({}));
        let (pa, ma) = a.finish(m.clone()).unwrap();
        assert_eq!(latest_run(root.path()).unwrap(), pa);
        assert_eq!(ma.outputs[0].sha256, sha256_hex(b"a\n"));
        let (pb, _) = b.finish(m).unwrap();
        assert_eq!(latest_run(root.path()).unwrap(), pb);
        assert!(pb.join(MANIFEST).exists());
    }

    #[test]
    fn no_latest_in_fresh_root() {
        let root = tempfile::tempdir().unwrap();
        assert!(latest_run(root.path()).is_none());
    }
}
