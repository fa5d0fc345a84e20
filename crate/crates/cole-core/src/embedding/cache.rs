//! JSON-lines embedding cache keyed by content digest.
//!
//! Each line is one record; duplicate keys resolve last-writer-wins on
//! load. Values are stored as f32, matching what embed_batch returns, so a
//! cache hit reproduces the original vector bit for bit.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

#[derive(Serialize, Deserialize, Clone)]
struct CacheRecord {
    key: String,
    provider: String,
    dim: usize,
    vec: Vec<f32>,
}

/// Persistent vector cache: concurrent readers, serialized writers.
pub struct EmbeddingCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, CacheRecord>>,
    writer: Mutex<BufWriter<File>>,
}

impl EmbeddingCache {
    /// Opens (or creates) the cache file at `path` and loads its records.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (lineno, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: CacheRecord = serde_json::from_str(&line).map_err(|e| {
                    Error::InvalidInput(format!(
                        "bad cache record at {}:{}: {e}",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                if record.vec.len() != record.dim {
                    return Err(Error::InvalidInput(format!(
                        "cache record at {}:{} declares dim {} but holds {} values",
                        path.display(),
                        lineno + 1,
                        record.dim,
                        record.vec.len()
                    )));
                }
                entries.insert(record.key.clone(), record);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(EmbeddingCache {
            path: path.to_path_buf(),
            entries: RwLock::new(entries),
            writer: Mutex::new(BufWriter::new(file)),
        })
    }

    /// Looks up `key`; a record written by a different provider is a miss.
    pub fn get(&self, key: &str, provider_id: &str) -> Option<Vec<f64>> {
        let entries = self.entries.read().expect("cache lock poisoned");
        let record = entries.get(key)?;
        if record.provider != provider_id {
            return None;
        }
        Some(record.vec.iter().map(|&v| v as f64).collect())
    }

    /// Inserts a vector and appends its record to the backing file.
    pub fn put(&self, key: &str, provider_id: &str, values: &[f64]) -> Result<()> {
        let record = CacheRecord {
            key: key.to_string(),
            provider: provider_id.to_string(),
            dim: values.len(),
            vec: values.iter().map(|&v| v as f32).collect(),
        };
        let line = serde_json::to_string(&record)?;
        {
            let mut writer = self.writer.lock().expect("cache lock poisoned");
            writeln!(writer, "{line}")?;
            writer.flush()?;
        }
        self.entries
            .write()
            .expect("cache lock poisoned")
            .insert(key.to_string(), record);
        Ok(())
    }

    /// Whether `key` is present for this provider.
    pub fn contains(&self, key: &str, provider_id: &str) -> bool {
        self.get(key, provider_id).is_some()
    }

    /// Number of cached vectors.
    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    /// Whether the cache holds no vectors.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Location of the backing file.
    pub fn path(&self) -> &Path {
        &self.path
    }
}
