//! Run records: one JSON line per command invocation with the config
//! digest, effective seed, timestamp, produced artifacts, and termination
//! status. The record carries the only non-deterministic field (the
//! timestamp); all data artifacts are byte-reproducible.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub timestamp: String,
    pub outputs: Vec<String>,
    pub status: String,
}

impl RunRecord {
    pub fn new(command: &str, config_digest: String, seed: u64) -> Self {
        RunRecord {
            command: command.to_string(),
            config_digest,
            seed,
            timestamp: chrono::Utc::now().to_rfc3339(),
            outputs: Vec::new(),
            status: String::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("run.json");
        let line = serde_json::to_string(self).context("serialize run record")?;
        std::fs::write(&path, format!("{line}\n"))
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}
