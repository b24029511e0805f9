use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub label: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to re-run a command and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// The effective configuration, output location excluded.
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub master_seed: u64,
    pub seeds: Vec<SeedEntry>,
    pub inputs: Vec<FileDigest>,
    /// Output files, relative to the output directory.
    pub outputs: Vec<FileDigest>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path, label: impl Into<String>) -> Result<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest {
        path: label.into(),
        sha256: sha256_hex(&bytes),
    })
}

impl Manifest {
    pub fn new<C: Serialize>(command: &str, config: &C, master_seed: u64) -> Result<Self> {
        let config = serde_json::to_value(config).map_err(|e| Error::Serialization(e.to_string()))?;
        let canonical = serde_json::to_string(&config).map_err(|e| Error::Serialization(e.to_string()))?;
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: sha256_hex(canonical.as_bytes()),
            config,
            master_seed,
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn config_as<C: serde::de::DeserializeOwned>(&self) -> Result<C> {
        serde_json::from_value(self.config.clone()).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Output files under `dir` whose digest differs from the manifest.
    pub fn verify_outputs(&self, dir: &Path) -> Result<Vec<String>> {
        let mut mismatched = Vec::new();
        for f in &self.outputs {
            let actual = file_digest(&dir.join(&f.path), f.path.clone())?;
            if actual.sha256 != f.sha256 {
                mismatched.push(f.path.clone());
            }
        }
        Ok(mismatched)
    }
}
