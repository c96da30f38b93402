//! Content-addressed JSON cache of expensive pipeline stages.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

static TMP_SEQ: AtomicUsize = AtomicUsize::new(0);

pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: &Path) -> Self {
        Cache { dir: dir.to_path_buf() }
    }

    /// Hex SHA-256 of the stage name and its governing parameters.
    pub fn key(stage: &str, params: &impl Serialize) -> String {
        let body = serde_json::to_string(params).expect("cache key serialises");
        let mut h = Sha256::new();
        h.update(stage.as_bytes());
        h.update([0u8]);
        h.update(body.as_bytes());
        format!("{stage}-{:x}", h.finalize())
    }

    /// Cached value for `key`, computing and storing it on a miss. Unreadable
    /// entries count as misses.
    pub fn get_or<T, F>(&self, key: &str, compute: F) -> Result<T, CliError>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T, CliError>,
    {
        let path = self.dir.join(format!("{key}.json"));
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(v) = serde_json::from_str(&text) {
                return Ok(v);
            }
        }
        let v = compute()?;
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        // Write then rename so concurrent sweep runs never read a partial file.
        let seq = TMP_SEQ.fetch_add(1, Ordering::Relaxed);
        let tmp = self.dir.join(format!("{key}.{}-{seq}.tmp", std::process::id()));
        std::fs::write(&tmp, serde_json::to_string(&v).expect("cache entry serialises"))
            .map_err(|e| CliError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
        Ok(v)
    }
}
