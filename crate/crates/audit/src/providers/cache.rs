//! Append-only JSONL response cache, one file per provider.
//!
//! Each line is one [`CacheRecord`]. Lines are written with a single
//! `write_all` under a lock, so a crash can only leave a truncated final
//! line; that line is dropped on the next open. Corruption anywhere else is
//! a hard error.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub model_version: String,
    pub retrieved_at: String,
    pub raw_response: Value,
    pub hate_score: f64,
    pub flagged: bool,
}

/// `provider:model_version:sha256(text)`.
pub fn cache_key(provider_id: &str, model_version: &str, text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    format!("{provider_id}:{model_version}:{}", hex::encode(digest))
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: line {line} is corrupt: {message}", path.display())]
    Corrupt { path: PathBuf, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CacheError + '_ {
    move |source| CacheError::Io { path: path.to_path_buf(), source }
}

#[derive(Default)]
struct Index {
    records: Vec<CacheRecord>,
    by_key: HashMap<String, usize>,
}

impl Index {
    fn insert(&mut self, record: CacheRecord) -> bool {
        if self.by_key.contains_key(&record.key) {
            return false;
        }
        self.by_key.insert(record.key.clone(), self.records.len());
        self.records.push(record);
        true
    }
}

pub struct ProviderCache {
    path: PathBuf,
    index: RwLock<Index>,
    file: Mutex<File>,
    recovered_truncation: bool,
}

impl ProviderCache {
    pub fn open(path: &Path) -> Result<Self, CacheError> {
        let mut bytes = Vec::new();
        if path.exists() {
            File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(io_err(path))?;
        }
        let mut index = Index::default();
        let mut offset = 0usize;
        let mut keep_len = bytes.len();
        let mut recovered_truncation = false;
        let segments: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
        let last_nonempty = segments.iter().rposition(|s| !s.is_empty());
        for (i, segment) in segments.iter().enumerate() {
            if !segment.is_empty() {
                let parsed = std::str::from_utf8(segment)
                    .map_err(|e| e.to_string())
                    .and_then(|s| serde_json::from_str::<CacheRecord>(s).map_err(|e| e.to_string()));
                match parsed {
                    Ok(record) => {
                        index.insert(record);
                    }
                    Err(_) if Some(i) == last_nonempty => {
                        log::warn!("{}: dropping truncated final line {}", path.display(), i + 1);
                        keep_len = offset;
                        recovered_truncation = true;
                    }
                    Err(message) => {
                        return Err(CacheError::Corrupt { path: path.to_path_buf(), line: i + 1, message })
                    }
                }
            }
            offset += segment.len() + 1;
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(path))?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
        if recovered_truncation {
            file.set_len(keep_len as u64).map_err(io_err(path))?;
        } else if !bytes.is_empty() && !bytes.ends_with(b"\n") {
            (&file).write_all(b"\n").map_err(io_err(path))?;
        }
        Ok(ProviderCache {
            path: path.to_path_buf(),
            index: RwLock::new(index),
            file: Mutex::new(file),
            recovered_truncation,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Whether opening dropped a truncated trailing line.
    pub fn recovered_truncation(&self) -> bool {
        self.recovered_truncation
    }

    pub fn get(&self, key: &str) -> Option<CacheRecord> {
        let index = self.index.read().unwrap();
        index.by_key.get(key).map(|&i| index.records[i].clone())
    }

    /// Appends unless the key is already stored. Returns whether it wrote.
    pub fn append(&self, record: CacheRecord) -> Result<bool, CacheError> {
        let mut line = serde_json::to_string(&record).expect("cache records serialize");
        line.push('\n');
        let mut file = self.file.lock().unwrap();
        let mut index = self.index.write().unwrap();
        if index.by_key.contains_key(&record.key) {
            return Ok(false);
        }
        file.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        file.flush().map_err(io_err(&self.path))?;
        index.insert(record);
        Ok(true)
    }

    pub fn records(&self) -> Vec<CacheRecord> {
        self.index.read().unwrap().records.clone()
    }

    pub fn len(&self) -> usize {
        self.index.read().unwrap().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Directory of per-provider cache files, opened lazily.
pub struct ScoreCache {
    dir: PathBuf,
    open: Mutex<HashMap<String, Arc<ProviderCache>>>,
}

impl ScoreCache {
    pub fn open(dir: &Path) -> Result<Self, CacheError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(ScoreCache { dir: dir.to_path_buf(), open: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn file_for(&self, provider_id: &str) -> PathBuf {
        self.dir.join(format!("{provider_id}.jsonl"))
    }

    pub fn provider(&self, provider_id: &str) -> Result<Arc<ProviderCache>, CacheError> {
        let mut open = self.open.lock().unwrap();
        if let Some(c) = open.get(provider_id) {
            return Ok(c.clone());
        }
        let c = Arc::new(ProviderCache::open(&self.file_for(provider_id))?);
        open.insert(provider_id.to_string(), c.clone());
        Ok(c)
    }

    /// Provider ids with a cache file, sorted.
    pub fn providers(&self) -> Result<Vec<String>, CacheError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(io_err(&self.dir))? {
            let path = entry.map_err(io_err(&self.dir))?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Deletes one provider's file. Returns whether it existed.
    pub fn purge(&self, provider_id: &str) -> Result<bool, CacheError> {
        self.open.lock().unwrap().remove(provider_id);
        let path = self.file_for(provider_id);
        if !path.exists() {
            return Ok(false);
        }
        fs::remove_file(&path).map_err(io_err(&path))?;
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn record(key: &str, score: f64) -> CacheRecord {
        CacheRecord {
            key: key.into(),
            model_version: "unknown".into(),
            retrieved_at: "2024-05-01T00:00:00Z".into(),
            raw_response: json!({"sub_scores": {"hate": score}}),
            hate_score: score,
            flagged: score >= 0.5,
        }
    }

    #[test]
    fn keys_hash_text() {
        let k = cache_key("p", "unknown", "hello");
        assert_eq!(k, "p:unknown:2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824");
        assert_ne!(k, cache_key("p", "v2", "hello"));
    }

    #[test]
    fn append_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let c = ProviderCache::open(&path).unwrap();
        assert!(c.append(record("a", 0.1)).unwrap());
        assert!(!c.append(record("a", 0.9)).unwrap());
        assert!(c.append(record("b", 0.7)).unwrap());
        drop(c);
        let c = ProviderCache::open(&path).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.get("a").unwrap().hate_score, 0.1);
    }

    #[test]
    fn truncated_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let c = ProviderCache::open(&path).unwrap();
        c.append(record("a", 0.1)).unwrap();
        drop(c);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"key":"b","model_ver"#).unwrap();
        drop(f);
        let c = ProviderCache::open(&path).unwrap();
        assert!(c.recovered_truncation());
        assert_eq!(c.len(), 1);
        c.append(record("c", 0.2)).unwrap();
        drop(c);
        let c = ProviderCache::open(&path).unwrap();
        assert!(!c.recovered_truncation());
        assert_eq!(c.records().iter().map(|r| r.key.as_str()).collect::<Vec<_>>(), ["a", "c"]);
    }

    #[test]
    fn earlier_corruption_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let good = serde_json::to_string(&record("a", 0.1)).unwrap();
        fs::write(&path, format!("{good}\nnot json\n{good}\n")).unwrap();
        match ProviderCache::open(&path) {
            Err(CacheError::Corrupt { line, .. }) => assert_eq!(line, 2),
            Err(e) => panic!("unexpected error {e}"),
            Ok(_) => panic!("corruption accepted"),
        }
    }

    #[test]
    fn directory_listing_and_purge() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ScoreCache::open(dir.path()).unwrap();
        assert!(cache.providers().unwrap().is_empty());
        cache.provider("b").unwrap().append(record("x", 0.3)).unwrap();
        cache.provider("a").unwrap();
        assert_eq!(cache.providers().unwrap(), ["a", "b"]);
        assert!(cache.purge("b").unwrap());
        assert!(!cache.purge("b").unwrap());
        assert_eq!(cache.providers().unwrap(), ["a"]);
    }
}
