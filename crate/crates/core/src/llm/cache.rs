use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use super::{LlmError, LlmExchange};

/// Content-addressed exchange store: one JSON file per cache key.
///
/// Files live at `<root>/<key[..2]>/<key>.json` and are written to a
/// temporary sibling first, then renamed into place.
#[derive(Debug)]
pub struct DiskCache {
    root: PathBuf,
    counter: AtomicU64,
}

fn io_err(path: &Path, source: std::io::Error) -> LlmError {
    LlmError::Cache {
        path: path.display().to_string(),
        source,
    }
}

impl DiskCache {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
        Ok(DiskCache {
            root,
            counter: AtomicU64::new(0),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        let shard = key.get(..2).unwrap_or("__");
        self.root.join(shard).join(format!("{key}.json"))
    }

    /// Returns the stored exchange; unreadable or corrupt entries count as misses.
    pub fn get(&self, key: &str) -> Result<Option<LlmExchange>, LlmError> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io_err(&path, e)),
        };
        match serde_json::from_slice::<LlmExchange>(&bytes) {
            Ok(ex) if ex.cache_key == key => Ok(Some(ex)),
            Ok(_) | Err(_) => {
                log::warn!("ignoring corrupt cache entry {}", path.display());
                Ok(None)
            }
        }
    }

    pub fn put(&self, exchange: &LlmExchange) -> Result<(), LlmError> {
        let path = self.path_for(&exchange.cache_key);
        let dir = path.parent().expect("cache paths have a shard directory");
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let tmp = dir.join(format!(".{}.{}.{n}.tmp", exchange.cache_key, std::process::id()));
        let body = serde_json::to_vec_pretty(exchange).expect("exchanges always serialize");
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&body)?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            io_err(&path, e)
        })
    }
}
