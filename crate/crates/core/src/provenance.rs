//! Tool version and config hash stamped on every stage artifact.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = concat!("citegen ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Provenance {
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config_hash.into(),
        }
    }

    /// Hash of the serialized run configuration.
    pub fn for_config<T: Serialize>(config: &T) -> Self {
        let bytes = serde_json::to_vec(config).unwrap_or_default();
        Provenance::new(config_hash(&bytes))
    }

    /// First line of every CSV artifact.
    pub fn csv_comment(&self) -> String {
        format!("# tool_version={} config_hash={}", self.tool_version, self.config_hash)
    }

    pub fn parse_csv_comment(line: &str) -> Option<Provenance> {
        let rest = line.strip_prefix("# ")?;
        let rest = rest.strip_prefix("tool_version=")?;
        let (tool, hash) = rest.rsplit_once(" config_hash=")?;
        Some(Provenance {
            tool_version: tool.to_string(),
            config_hash: hash.trim().to_string(),
        })
    }
}

pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub provenance: Provenance,
    pub data: T,
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| Error::Write {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, provenance: &Provenance, data: &T) -> Result<()> {
    let env = Envelope {
        provenance: provenance.clone(),
        data,
    };
    let mut text = serde_json::to_string_pretty(&env)
        .map_err(|e| Error::json(path.display().to_string(), e))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Envelope<T>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

pub fn read_csv_provenance(path: &Path) -> Result<Provenance> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .next()
        .and_then(Provenance::parse_csv_comment)
        .ok_or_else(|| Error::Provenance(format!("{} has no provenance line", path.display())))
}

/// All inputs must come from the same configuration and tool version.
pub fn ensure_consistent<'a>(
    items: impl IntoIterator<Item = (&'a str, &'a Provenance)>,
) -> Result<Option<Provenance>> {
    let mut first: Option<(&str, &Provenance)> = None;
    for (name, p) in items {
        match first {
            None => first = Some((name, p)),
            Some((n0, p0)) if p0 != p => {
                return Err(Error::Provenance(format!(
                    "{n0} has {} / {}, {name} has {} / {}",
                    p0.tool_version, p0.config_hash, p.tool_version, p.config_hash
                )))
            }
            _ => {}
        }
    }
    Ok(first.map(|(_, p)| p.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comment_round_trip() {
        let p = Provenance::new("abc123");
        assert_eq!(Provenance::parse_csv_comment(&p.csv_comment()), Some(p));
        assert_eq!(Provenance::parse_csv_comment("backend,config"), None);
    }

    #[test]
    fn mixed_hashes_rejected() {
        let a = Provenance::new("aa");
        let b = Provenance::new("bb");
        assert!(ensure_consistent([("x", &a), ("y", &a)]).is_ok());
        let err = ensure_consistent([("x", &a), ("y", &b)]).unwrap_err();
        assert!(err.to_string().contains("y has"));
    }

    #[test]
    fn json_envelope() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/a.json");
        let p = Provenance::for_config(&vec![1, 2, 3]);
        write_json(&path, &p, &vec!["x".to_string()]).unwrap();
        let back: Envelope<Vec<String>> = read_json(&path).unwrap();
        assert_eq!(back.provenance, p);
        assert_eq!(back.data, ["x"]);
    }
}
