//! Run manifests: every command writes one next to its outputs so a run can
//! be audited and reproduced byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize, Default)]
pub struct ManifestConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gating_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_frames: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub downsample: Option<u32>,
}

#[derive(Serialize)]
struct ManifestInput {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
pub struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: ManifestConfig,
    inputs: Vec<ManifestInput>,
    outputs: Vec<String>,
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn new(command: &'static str, config: ManifestConfig) -> Self {
        Self {
            tool: "atrk",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Records input files with content digests; paths are sorted so the
    /// manifest is deterministic regardless of directory iteration order.
    pub fn with_inputs(mut self, paths: &[PathBuf]) -> Result<Self> {
        let mut sorted: Vec<&PathBuf> = paths.iter().collect();
        sorted.sort();
        for path in sorted {
            self.inputs.push(ManifestInput {
                path: path.display().to_string(),
                sha256: sha256_hex(path)?,
            });
        }
        Ok(self)
    }

    pub fn with_outputs(mut self, paths: &[PathBuf]) -> Self {
        self.outputs = paths.iter().map(|p| p.display().to_string()).collect();
        self
    }

    /// Serializes and writes the manifest to `path`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        fs::write(path, json).with_context(|| format!("writing {}", path.display()))
    }
}
