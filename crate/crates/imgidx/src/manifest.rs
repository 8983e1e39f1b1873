//! Run manifests: what produced a run directory and digests of its files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::canon::to_canonical;
use crate::error::{CliError, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the run directory for outputs; as given for inputs.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub config: String,
    pub seed: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Fully resolved configuration after defaults and flag overrides.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    pub runs: Vec<RunTiming>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path, label: String) -> Result<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(FileDigest {
        path: label,
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_NAME);
        std::fs::write(&path, to_canonical(self)?).map_err(|e| CliError::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        if !path.is_file() {
            return Err(CliError::BadInput(format!("no manifest in {}", dir.display())));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::BadInput(format!("{}: invalid manifest: {e}", path.display())))
    }
}

/// One output whose digest no longer matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub path: String,
    pub reason: String,
}

/// Recompute every output digest listed in the manifest of `dir`.
pub fn verify_dir(dir: &Path) -> Result<Vec<Mismatch>> {
    let manifest = RunManifest::read(dir)?;
    let mut out = Vec::new();
    for f in &manifest.outputs {
        let path = dir.join(&f.path);
        match std::fs::read(&path) {
            Err(_) => out.push(Mismatch {
                path: f.path.clone(),
                reason: "missing".into(),
            }),
            Ok(bytes) => {
                let got = sha256_hex(&bytes);
                if got != f.sha256 {
                    out.push(Mismatch {
                        path: f.path.clone(),
                        reason: format!("sha256 {got}, manifest {}", f.sha256),
                    });
                }
            }
        }
    }
    Ok(out)
}
