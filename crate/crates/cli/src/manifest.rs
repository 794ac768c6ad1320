//! Provenance record written next to every artifact set.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use swarm_lattice::config::ExperimentConfig;

use crate::Failure;

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    /// SHA-256 of the resolved configuration serialized as TOML.
    pub config_hash: String,
    pub config: &'a ExperimentConfig,
    pub seeds: Value,
    pub files: Vec<String>,
}

pub fn config_hash(config: &ExperimentConfig) -> Result<String, Failure> {
    let text = config.to_toml_string()?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

pub fn write(
    dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    seeds: Value,
    files: &[&str],
) -> Result<(), Failure> {
    let manifest = Manifest {
        tool: env!("CARGO_BIN_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_hash: config_hash(config)?,
        config,
        seeds,
        files: files.iter().map(|s| s.to_string()).collect(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Config(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}
