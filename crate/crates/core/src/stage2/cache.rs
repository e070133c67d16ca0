//! Append-only response cache keyed by prompt version, model, party and window.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Sentiment;
use crate::jsonl::{self, JsonlError};

pub fn cache_key(prompt_version: &str, model_id: &str, party: &str, window_text: &str) -> String {
    let mut h = Sha256::new();
    for part in [prompt_version, model_id, party, window_text] {
        h.update(part.as_bytes());
        h.update([0x1f]);
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheEntry {
    pub key: String,
    pub on_target: u8,
    pub sentiment: Sentiment,
    pub reasoning: String,
    pub model_id: String,
    pub prompt_version: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost_usd: f64,
}

/// In-memory map backed by a newline-delimited file; first entry per key wins.
#[derive(Debug)]
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<String, CacheEntry>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            entries: Mutex::new(HashMap::new()),
        }
    }

    pub fn open(path: &Path) -> Result<Self, JsonlError> {
        let mut entries = HashMap::new();
        for e in jsonl::read_or_empty::<CacheEntry>(path)? {
            entries.entry(e.key.clone()).or_insert(e);
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries: Mutex::new(entries),
        })
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        self.entries.lock().unwrap().get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, entry: CacheEntry) -> Result<(), JsonlError> {
        let mut map = self.entries.lock().unwrap();
        if map.contains_key(&entry.key) {
            return Ok(());
        }
        if let Some(p) = &self.path {
            jsonl::append(p, std::slice::from_ref(&entry))?;
        }
        map.insert(entry.key.clone(), entry);
        Ok(())
    }
}
