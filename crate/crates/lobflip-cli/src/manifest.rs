//! Run manifests: every file-producing subcommand records its effective
//! config and the SHA-256 of each input and output, and consumers verify
//! upstream outputs against the recorded hashes before trusting them.
//!
//! Manifests carry no timestamps or host details, so a rerun with the same
//! config produces a byte-identical `manifest.json`.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use lobflip::pipeline::sha256_hex_file;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest mismatch: {path} hashes to {actual}, manifest records {recorded}")]
    Mismatch { path: String, recorded: String, actual: String },
    #[error("manifest lists {path} but the file is missing")]
    Missing { path: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub subcommand: String,
    /// Effective config after merging defaults, profile, file, and flags.
    pub config: serde_json::Value,
    /// Inputs as given on the command line, hashed at read time.
    pub inputs: Vec<FileHash>,
    /// Outputs relative to the manifest's directory.
    pub outputs: Vec<FileHash>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: &impl Serialize) -> Result<RunManifest> {
        Ok(RunManifest {
            tool: "lobflip".to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            config: serde_json::to_value(config).context("serializing config snapshot")?,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let sha256 = sha256_hex_file(path)
            .with_context(|| format!("hashing input {}", path.display()))?;
        self.inputs.push(FileHash { path: path.display().to_string(), sha256 });
        Ok(())
    }

    /// Record `dir/name`, storing the name so the manifest stays valid when
    /// the directory moves.
    pub fn record_output(&mut self, dir: &Path, name: &str) -> Result<()> {
        let sha256 = sha256_hex_file(&dir.join(name))
            .with_context(|| format!("hashing output {name}"))?;
        self.outputs.push(FileHash { path: name.to_string(), sha256 });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_NAME);
        let json = serde_json::to_string_pretty(self).context("serializing manifest")?;
        fs::write(&path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Check every output recorded in `dir`'s manifest against the bytes on
/// disk. A missing manifest is allowed (externally produced data) and only
/// logged; a hash mismatch or missing listed file is an error.
pub fn verify_upstream(dir: &Path) -> Result<()> {
    let path = dir.join(MANIFEST_NAME);
    if !path.exists() {
        log::warn!("no {} in {}; skipping hash verification", MANIFEST_NAME, dir.display());
        return Ok(());
    }
    let m = RunManifest::load(&path)?;
    for f in &m.outputs {
        let file = dir.join(&f.path);
        if !file.exists() {
            return Err(ManifestError::Missing { path: f.path.clone() })
                .with_context(|| format!("verifying {}", path.display()));
        }
        let actual = sha256_hex_file(&file)
            .with_context(|| format!("hashing {}", file.display()))?;
        if actual != f.sha256 {
            return Err(ManifestError::Mismatch {
                path: f.path.clone(),
                recorded: f.sha256.clone(),
                actual,
            })
            .with_context(|| format!("verifying {}", path.display()));
        }
    }
    log::info!("verified {} files against {}", m.outputs.len(), path.display());
    Ok(())
}
