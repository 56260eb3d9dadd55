use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// What was run, from which inputs, and what it wrote.
///
/// Timestamps live only here so every other artifact is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub started_at: u64,
    pub finished_at: u64,
    pub inputs: Vec<OutputFile>,
    pub outputs: Vec<OutputFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn describe(path: &Path, shown: String) -> Result<OutputFile, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(OutputFile {
        path: shown,
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    out_dir: PathBuf,
}

impl ManifestBuilder {
    pub fn new(command: &str, config_text: &str, seed: u64, out_dir: &Path) -> Self {
        Self {
            manifest: RunManifest {
                command: command.into(),
                args: std::env::args().skip(1).collect(),
                config_hash: sha256_hex(config_text.as_bytes()),
                seed,
                tool_version: env!("CARGO_PKG_VERSION").into(),
                started_at: now(),
                finished_at: 0,
                inputs: Vec::new(),
                outputs: Vec::new(),
            },
            out_dir: out_dir.to_path_buf(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let f = describe(path, path.display().to_string())?;
        self.manifest.inputs.push(f);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), CliError> {
        let shown = path.strip_prefix(&self.out_dir).unwrap_or(path).display().to_string();
        let f = describe(path, shown)?;
        self.manifest.outputs.push(f);
        Ok(())
    }

    /// Writes `<command>.manifest.json` into the output directory.
    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.manifest.finished_at = now();
        self.manifest.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let path = self.out_dir.join(format!("{}.manifest.json", self.manifest.command));
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
