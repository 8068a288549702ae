//! Append-only translation cache stored as JSON Lines.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RoundTripError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub engine: String,
    pub src: String,
    pub dst: String,
    /// sha256 of the source text, hex encoded.
    pub hash: String,
}

impl CacheKey {
    pub fn new(engine: &str, src: &str, dst: &str, text: &str) -> Self {
        Self {
            engine: engine.to_string(),
            src: src.to_string(),
            dst: dst.to_string(),
            hash: hex::encode(Sha256::digest(text.as_bytes())),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Entry {
    #[serde(flatten)]
    key: CacheKey,
    text: String,
}

/// Write-once map from [`CacheKey`] to translated text. With a backing file
/// every new entry is appended and flushed before it becomes visible.
#[derive(Debug, Default)]
pub struct TranslationCache {
    entries: Mutex<BTreeMap<CacheKey, String>>,
    file: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl TranslationCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> Result<Self, RoundTripError> {
        let cache_err = |e: String| RoundTripError::Cache(format!("{}: {e}", path.display()));
        let mut entries = BTreeMap::new();
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| cache_err(e.to_string()))?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let e: Entry = serde_json::from_str(line).map_err(|e| cache_err(format!("line {}: {e}", i + 1)))?;
                if let Some(prev) = entries.get(&e.key) {
                    if *prev != e.text {
                        return Err(cache_err(format!("line {} rewrites an existing key", i + 1)));
                    }
                }
                entries.insert(e.key, e.text);
            }
        } else if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| cache_err(e.to_string()))?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| cache_err(e.to_string()))?;
        Ok(Self { entries: Mutex::new(entries), file: Some(Mutex::new(file)), path: Some(path.to_path_buf()) })
    }

    pub fn get(&self, key: &CacheKey) -> Option<String> {
        self.entries.lock().expect("cache lock").get(key).cloned()
    }

    /// Stores `text` unless the key is already present; the first value
    /// written for a key wins.
    pub fn put(&self, key: CacheKey, text: &str) -> Result<String, RoundTripError> {
        let mut entries = self.entries.lock().expect("cache lock");
        if let Some(existing) = entries.get(&key) {
            return Ok(existing.clone());
        }
        if let Some(file) = &self.file {
            let line = serde_json::to_string(&Entry { key: key.clone(), text: text.to_string() })
                .map_err(|e| RoundTripError::Cache(e.to_string()))?;
            let mut f = file.lock().expect("cache file lock");
            writeln!(f, "{line}")
                .and_then(|_| f.flush())
                .map_err(|e| RoundTripError::Cache(format!("{}: {e}", self.path.as_ref().expect("path").display())))?;
        }
        entries.insert(key, text.to_string());
        Ok(text.to_string())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
