//! Per-stage run manifests and the skip-if-unchanged check.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    pub complete: bool,
    /// Hash of the stage's settings and input files.
    pub input_fingerprint: String,
    /// Hash of each output file as written.
    pub outputs: BTreeMap<String, String>,
    pub counts: BTreeMap<String, u64>,
    pub quarantined: u64,
    pub spent_usd: f64,
    #[serde(default)]
    pub note: Option<String>,
}

impl RunManifest {
    pub fn begin(stage: &str, config_hash: &str, seed: u64, input_fingerprint: String) -> Self {
        Self {
            stage: stage.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            started_at: Utc::now(),
            finished_at: None,
            complete: false,
            input_fingerprint,
            outputs: BTreeMap::new(),
            counts: BTreeMap::new(),
            quarantined: 0,
            spent_usd: 0.0,
            note: None,
        }
    }

    pub fn path(state_dir: &Path, stage: &str) -> PathBuf {
        state_dir.join(format!("{stage}.manifest.json"))
    }

    pub fn load(state_dir: &Path, stage: &str) -> Option<Self> {
        let text = std::fs::read_to_string(Self::path(state_dir, stage)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn save(&self, state_dir: &Path) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| PipelineError::stage(&self.stage, e))?;
        text.push('\n');
        jsonl::write_bytes_atomic(&Self::path(state_dir, &self.stage), text.as_bytes())?;
        Ok(())
    }

    pub fn count(&mut self, key: &str, value: usize) {
        self.counts.insert(key.to_string(), value as u64);
    }

    pub fn record_outputs(&mut self, outputs: &[&Path]) -> Result<(), PipelineError> {
        for p in outputs {
            self.outputs.insert(p.display().to_string(), file_hash(p)?);
        }
        Ok(())
    }

    /// True when a previous complete run saw the same inputs and its
    /// outputs are still on disk unchanged.
    pub fn is_current(&self, input_fingerprint: &str) -> bool {
        self.complete
            && self.input_fingerprint == input_fingerprint
            && !self.outputs.is_empty()
            && self
                .outputs
                .iter()
                .all(|(p, h)| file_hash(Path::new(p)).is_ok_and(|actual| &actual == h))
    }
}

fn file_hash(path: &Path) -> Result<String, PipelineError> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| PipelineError::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        let mut h = Sha256::new();
        for p in entries {
            h.update(p.file_name().unwrap_or_default().as_encoded_bytes());
            h.update([0]);
            h.update(file_hash(&p)?.as_bytes());
        }
        return Ok(hex::encode(h.finalize()));
    }
    let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Builds the fingerprint a stage compares against its last manifest.
pub struct Fingerprint(Sha256);

impl Fingerprint {
    pub fn new(stage: &str) -> Self {
        let mut h = Sha256::new();
        h.update(stage.as_bytes());
        Self(h)
    }

    pub fn value<T: Serialize>(mut self, label: &str, v: &T) -> Self {
        let json = serde_json::to_value(v).expect("settings serialize").to_string();
        self.0.update([0x1e]);
        self.0.update(label.as_bytes());
        self.0.update([0x1f]);
        self.0.update(json.as_bytes());
        self
    }

    /// Missing inputs are reported as [`PipelineError::MissingArtifact`].
    pub fn file(mut self, label: &str, path: &Path) -> Result<Self, PipelineError> {
        if !path.exists() {
            return Err(PipelineError::MissingArtifact(path.to_path_buf()));
        }
        self.0.update([0x1e]);
        self.0.update(label.as_bytes());
        self.0.update([0x1f]);
        self.0.update(file_hash(path)?.as_bytes());
        Ok(self)
    }

    /// Like [`Fingerprint::file`] but an absent file hashes as empty.
    pub fn optional_file(mut self, label: &str, path: &Path) -> Result<Self, PipelineError> {
        self.0.update([0x1e]);
        self.0.update(label.as_bytes());
        self.0.update([0x1f]);
        if path.exists() {
            self.0.update(file_hash(path)?.as_bytes());
        }
        Ok(self)
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}
