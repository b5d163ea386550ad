//! Run manifests: everything needed to reproduce a run bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::errors::CliResult;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub engine_version: String,
    pub master_seed: u64,
    pub started_at: String,
    pub finished_at: String,
    /// Fully resolved configuration of the run.
    pub config: serde_json::Value,
    /// SHA-256 of every input file consumed.
    pub input_hashes: BTreeMap<String, String>,
    /// Subtrial label for each contiguous 1-based index, when a dataset
    /// was ingested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subtrial_labels: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, master_seed: u64, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            started_at: now_rfc3339(),
            finished_at: String::new(),
            config,
            input_hashes: BTreeMap::new(),
            subtrial_labels: Vec::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> CliResult<()> {
        let bytes = std::fs::read(path)?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        self.input_hashes
            .insert(path.display().to_string(), format!("{:x}", hasher.finalize()));
        Ok(())
    }

    pub fn finish(&mut self) {
        self.finished_at = now_rfc3339();
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let json = serde_json::to_string_pretty(self)
            .expect("manifest serialization cannot fail");
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
