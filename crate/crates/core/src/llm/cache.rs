use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LlmError, LlmRequest};

/// Lowercase hex SHA-256 over model, prompt and decoding parameters. Each
/// field is length-prefixed so no two requests share an encoding.
pub fn cache_key(request: &LlmRequest) -> String {
    let mut h = Sha256::new();
    for part in [request.model.as_bytes(), request.prompt.as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    h.update(request.temperature.to_bits().to_le_bytes());
    h.update(request.max_tokens.to_le_bytes());
    hex::encode(&h.finalize()[..])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub model: String,
    pub created_at: String,
    pub response: String,
}

/// One JSON file per key. Writes go to a temp file in the same directory
/// and are renamed into place, so readers never see partial entries.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| LlmError::Cache(format!("{}: {e}", dir.display())))?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, LlmError> {
        let path = self.path_for(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(LlmError::Cache(format!("{}: {e}", path.display()))),
        };
        let entry: CacheEntry =
            serde_json::from_slice(&bytes).map_err(|e| LlmError::Cache(format!("{}: {e}", path.display())))?;
        if entry.key != key {
            return Err(LlmError::Cache(format!("{}: key mismatch", path.display())));
        }
        Ok(Some(entry))
    }

    pub fn put(&self, entry: &CacheEntry) -> Result<(), LlmError> {
        let err = |e: std::io::Error| LlmError::Cache(format!("{}: {e}", self.dir.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(err)?;
        serde_json::to_writer(&mut tmp, entry).map_err(|e| LlmError::Cache(e.to_string()))?;
        tmp.flush().map_err(err)?;
        tmp.persist(self.path_for(&entry.key)).map_err(|e| err(e.error))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        std::fs::read_dir(&self.dir)
            .map(|d| d.filter_map(Result::ok).filter(|e| e.path().extension().is_some_and(|x| x == "json")).count())
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_is_sensitive_to_every_field() {
        let base = LlmRequest::new("gpt-4", "Report: x\nAnswer:");
        let k = cache_key(&base);
        assert_eq!(k.len(), 64);
        assert!(k.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
        let variants = [
            LlmRequest { model: "gpt-4o".into(), ..base.clone() },
            LlmRequest { prompt: "Report: y\nAnswer:".into(), ..base.clone() },
            LlmRequest { temperature: 0.5, ..base.clone() },
            LlmRequest { max_tokens: 7, ..base.clone() },
        ];
        for v in &variants {
            assert_ne!(cache_key(v), k);
        }
        // field boundaries matter
        let a = LlmRequest::new("ab", "c");
        let b = LlmRequest::new("a", "bc");
        assert_ne!(cache_key(&a), cache_key(&b));
    }

    #[test]
    fn put_get_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path().join("c")).unwrap();
        let key = cache_key(&LlmRequest::new("m", "p"));
        assert!(cache.get(&key).unwrap().is_none());
        let e = CacheEntry { key: key.clone(), model: "m".into(), created_at: "t".into(), response: "r\n\u{e9}".into() };
        cache.put(&e).unwrap();
        assert_eq!(cache.get(&key).unwrap(), Some(e));
        assert_eq!(cache.len(), 1);
    }
}
