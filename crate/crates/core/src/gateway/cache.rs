use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::GenerationRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStatus {
    Hit,
    Miss,
}

#[derive(Serialize)]
struct IndexLine<'a> {
    key: &'a str,
    backend_id: &'a str,
    label: &'a str,
    instance_id: &'a str,
}

/// Content-addressed store of generation records. Records live at
/// `<root>/<key[..2]>/<key>.json` and are never overwritten.
#[derive(Debug)]
pub struct GenerationCache {
    root: PathBuf,
    writer: Mutex<()>,
}

impl GenerationCache {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root).map_err(|e| Error::Write {
            path: root.clone(),
            source: e,
        })?;
        Ok(GenerationCache {
            root,
            writer: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        let shard = key.get(..2).unwrap_or("xx");
        self.root.join(shard).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<GenerationRecord>> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::Read { path, source: e }),
        };
        let rec: GenerationRecord = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
        if rec.key != key {
            return Err(Error::Cache(format!(
                "{} holds record for key {}",
                path.display(),
                rec.key
            )));
        }
        Ok(Some(rec))
    }

    /// Store a record. If the key is already present the stored record wins
    /// and is returned.
    pub fn put(&self, record: GenerationRecord) -> Result<GenerationRecord> {
        let _guard = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(existing) = self.get(&record.key)? {
            if existing.system != record.system || existing.user != record.user {
                return Err(Error::Cache(format!(
                    "key {} already stores a different prompt",
                    record.key
                )));
            }
            return Ok(existing);
        }
        let path = self.path_for(&record.key);
        let dir = path.parent().expect("sharded path has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::Write {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let tmp = dir.join(format!(".{}.tmp", record.key));
        let bytes = serde_json::to_vec_pretty(&record).map_err(|e| Error::Cache(e.to_string()))?;
        fs::write(&tmp, &bytes).map_err(|e| Error::Write {
            path: tmp.clone(),
            source: e,
        })?;
        fs::rename(&tmp, &path).map_err(|e| Error::Write {
            path: path.clone(),
            source: e,
        })?;

        let index = self.root.join("index.jsonl");
        let line = serde_json::to_string(&IndexLine {
            key: &record.key,
            backend_id: &record.backend_id,
            label: &record.label,
            instance_id: &record.instance_id,
        })
        .map_err(|e| Error::Cache(e.to_string()))?;
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&index)
            .map_err(|e| Error::Write {
                path: index.clone(),
                source: e,
            })?;
        writeln!(f, "{line}").map_err(|e| Error::Write {
            path: index,
            source: e,
        })?;
        Ok(record)
    }

    /// Number of stored records.
    pub fn len(&self) -> usize {
        let Ok(shards) = fs::read_dir(&self.root) else {
            return 0;
        };
        shards
            .flatten()
            .filter(|e| e.path().is_dir())
            .flat_map(|e| fs::read_dir(e.path()).into_iter().flatten().flatten())
            .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
