use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::TranslationRequest;
use crate::corpus::Language;
use crate::seed::hex_digest;

/// One persisted translation. The full request is stored next to the key so
/// a hash collision is detected instead of returning the wrong text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationCacheEntry {
    pub key: String,
    pub source: Language,
    pub target: Language,
    pub text: String,
    pub translated_text: String,
    pub provider_id: String,
    pub timestamp: u64,
}

impl TranslationCacheEntry {
    fn matches(&self, request: &TranslationRequest) -> bool {
        self.source == request.source() && self.target == request.target() && self.text == request.text()
    }
}

pub fn cache_key(request: &TranslationRequest) -> String {
    let mut bytes = Vec::with_capacity(request.text().len() + 8);
    bytes.extend_from_slice(request.source().code().as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(request.target().code().as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(request.text().as_bytes());
    hex_digest(&bytes)
}

/// Translation cache, optionally backed by an append-only JSON-lines file.
#[derive(Debug, Default)]
pub struct TranslationCache {
    entries: HashMap<String, TranslationCacheEntry>,
    file: Option<(PathBuf, File)>,
}

impl TranslationCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a cache file and loads its entries. A
    /// truncated final line, as left by an interrupted write, is ignored.
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                if let Ok(entry) = serde_json::from_str::<TranslationCacheEntry>(&line) {
                    entries.insert(entry.key.clone(), entry);
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            entries,
            file: Some((path.to_path_buf(), file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, request: &TranslationRequest) -> Option<&str> {
        self.entries
            .get(&cache_key(request))
            .filter(|e| e.matches(request))
            .map(|e| e.translated_text.as_str())
    }

    pub fn insert(
        &mut self,
        request: &TranslationRequest,
        translated_text: String,
        provider_id: &str,
    ) -> std::io::Result<()> {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let entry = TranslationCacheEntry {
            key: cache_key(request),
            source: request.source(),
            target: request.target(),
            text: request.text().to_string(),
            translated_text,
            provider_id: provider_id.to_string(),
            timestamp,
        };
        if let Some((_, file)) = &mut self.file {
            let mut line = serde_json::to_string(&entry).map_err(std::io::Error::other)?;
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        self.entries.insert(entry.key.clone(), entry);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(text: &str) -> TranslationRequest {
        TranslationRequest::new(text, Language::Bn, Language::En).unwrap()
    }

    #[test]
    fn persisted_entries_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let mut cache = TranslationCache::open(&path).unwrap();
            cache.insert(&req("ভালো"), "good".into(), "stub").unwrap();
            cache.insert(&req("খারাপ"), "bad".into(), "stub").unwrap();
        }
        let cache = TranslationCache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.get(&req("ভালো")), Some("good"));
        assert_eq!(cache.get(&req("অন্য")), None);

        let line = std::fs::read_to_string(&path).unwrap();
        let first: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
        for field in [
            "key",
            "source",
            "target",
            "text",
            "translated_text",
            "provider_id",
            "timestamp",
        ] {
            assert!(first.get(field).is_some(), "missing {field}");
        }
        assert_eq!(first["source"], "bn");
    }

    #[test]
    fn truncated_tail_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let mut cache = TranslationCache::open(&path).unwrap();
            cache.insert(&req("এক"), "one".into(), "stub").unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"key\": \"abc\", \"sour").unwrap();
        let cache = TranslationCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn colliding_key_with_different_request_is_a_miss() {
        let mut cache = TranslationCache::in_memory();
        cache.insert(&req("x"), "y".into(), "stub").unwrap();
        let key = cache_key(&req("x"));
        cache.entries.get_mut(&key).unwrap().text = "tampered".into();
        assert_eq!(cache.get(&req("x")), None);
    }
}
