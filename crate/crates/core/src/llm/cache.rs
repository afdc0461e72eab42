use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CacheKey, CompletionRequest, GatewayError};

/// One response per key at `<root>/<first-2-hex>/<key>.json`.
#[derive(Debug)]
pub struct DiskCache {
    root: PathBuf,
    tmp_counter: AtomicU64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    key: String,
    provider: String,
    request_digest: RequestDigest,
    response: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RequestDigest {
    system_prompt_sha256: String,
    user_prompt_sha256: String,
    temperature: f64,
    seed_tag: String,
}

fn sha_hex(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

impl DiskCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            tmp_counter: AtomicU64::new(0),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.root.join(&key.as_str()[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &CacheKey) -> Option<String> {
        let bytes = std::fs::read(self.path_for(key)).ok()?;
        let entry: Entry = serde_json::from_slice(&bytes).ok()?;
        (entry.key == key.as_str()).then_some(entry.response)
    }

    /// Write-then-rename so readers never observe a partial file.
    pub fn put(
        &self,
        key: &CacheKey,
        provider: &str,
        req: &CompletionRequest,
        response: &str,
    ) -> Result<(), GatewayError> {
        let path = self.path_for(key);
        let dir = path.parent().expect("cache path has a parent");
        let err = |e: std::io::Error| GatewayError::Cache(format!("{}: {e}", path.display()));
        std::fs::create_dir_all(dir).map_err(err)?;
        let entry = Entry {
            key: key.as_str().to_string(),
            provider: provider.to_string(),
            request_digest: RequestDigest {
                system_prompt_sha256: sha_hex(&req.system_prompt),
                user_prompt_sha256: sha_hex(&req.user_prompt),
                temperature: req.temperature,
                seed_tag: req.seed_tag.clone(),
            },
            response: response.to_string(),
        };
        let body = serde_json::to_vec_pretty(&entry).map_err(|e| GatewayError::Cache(e.to_string()))?;
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = dir.join(format!(".{key}.{}.{n}.tmp", std::process::id()));
        std::fs::write(&tmp, body).map_err(err)?;
        std::fs::rename(&tmp, &path).map_err(err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::Task;

    #[test]
    fn layout_and_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DiskCache::new(dir.path());
        let req = CompletionRequest::new(Task::Classify, "s", "u");
        let key = CacheKey::new("p", &req);
        assert_eq!(cache.get(&key), None);
        cache.put(&key, "p", &req, "0.5").unwrap();
        let path = cache.path_for(&key);
        assert!(path.starts_with(dir.path().join(&key.as_str()[..2])));
        assert_eq!(cache.get(&key).as_deref(), Some("0.5"));
        let leftovers = std::fs::read_dir(path.parent().unwrap())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp"))
            .count();
        assert_eq!(leftovers, 0);
    }
}
