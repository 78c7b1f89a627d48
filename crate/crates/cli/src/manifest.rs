//! Run manifests: what was run, on which inputs, producing which outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::Failure;

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub command: String,
    pub config_hash: String,
    pub config: RunConfig,
    /// Input path (as given) to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    /// Output file name (relative to the output directory) to SHA-256.
    pub outputs: BTreeMap<String, String>,
    /// RFC 3339; the only field that differs between identical reruns.
    pub created_at: String,
}

pub fn sha256_file(path: &Path) -> Result<String, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects inputs and outputs of one command and writes the manifest.
pub struct ManifestBuilder {
    command: String,
    out_dir: PathBuf,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
}

impl ManifestBuilder {
    pub fn new(command: &str, out_dir: &Path) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            out_dir: out_dir.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    /// Writes `bytes` to `name` inside the output directory and records it.
    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| Failure::data(format!("cannot create {}: {e}", self.out_dir.display())))?;
        let path = self.out_dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))?;
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
        Ok(path)
    }

    pub fn finish(self, config: &RunConfig) -> Result<Manifest, Failure> {
        let mut inputs = BTreeMap::new();
        for p in &self.inputs {
            inputs.insert(p.display().to_string(), sha256_file(p)?);
        }
        let mut outputs = BTreeMap::new();
        for name in &self.outputs {
            outputs.insert(name.clone(), sha256_file(&self.out_dir.join(name))?);
        }
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            core_version: ecr_cad::VERSION.to_string(),
            command: self.command,
            config_hash: config.hash(),
            config: config.clone(),
            inputs,
            outputs,
            created_at: chrono::Utc::now().to_rfc3339(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.out_dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))?;
        Ok(manifest)
    }
}
