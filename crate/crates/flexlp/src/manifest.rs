//! Run manifests: what a command read, what it wrote, and with which
//! settings.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileHash {
    /// Path as given on the command line or relative to the run directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn hash_entry(path: &Path, shown: &str) -> Result<FileHash> {
    Ok(FileHash {
        path: shown.to_string(),
        sha256: sha256_file(path)?,
    })
}

pub fn manifest_path(dir: &Path, command: &str) -> PathBuf {
    dir.join(format!("{command}.manifest.json"))
}

impl Manifest {
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = manifest_path(dir, &self.command);
        crate::formats::write_json(&path, self)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }
}

/// Every manifest in `dir`, skipping unreadable ones.
pub fn manifests_in(dir: &Path) -> Vec<Manifest> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Vec::new();
    };
    let mut found: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".manifest.json"))
        })
        .collect();
    found.sort();
    found
        .iter()
        .filter_map(|p| Manifest::load(p).ok())
        .collect()
}

/// A file whose current hash differs from the hash recorded when an
/// upstream command wrote it.
#[derive(Clone, Debug, PartialEq)]
pub struct Stale {
    pub path: String,
    pub producer: String,
    pub recorded: String,
    pub current: String,
}

/// Compares `input` (named `shown` in manifests) against the outputs
/// recorded by the manifests of `dir`.
pub fn check_staleness(dir: &Path, input: &Path, shown: &str) -> Result<Vec<Stale>> {
    let current = sha256_file(input)?;
    Ok(manifests_in(dir)
        .into_iter()
        .flat_map(|m| {
            let cmd = m.command.clone();
            m.outputs
                .into_iter()
                .filter(|o| o.path == shown)
                .map(move |o| (cmd.clone(), o))
        })
        .filter(|(_, o)| o.sha256 != current)
        .map(|(producer, o)| Stale {
            path: o.path,
            producer,
            recorded: o.sha256,
            current: current.clone(),
        })
        .collect())
}
