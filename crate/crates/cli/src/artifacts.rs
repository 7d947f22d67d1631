//! Stage artifact locations and typed loaders.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use citegen_core::provenance::{self, Envelope, Provenance};
use citegen_core::{Error, Result};

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn bundle(&self) -> PathBuf {
        self.root.join("corpus/bundle.json")
    }
    pub fn examples(&self) -> PathBuf {
        self.root.join("corpus/examples.json")
    }
    pub fn intents(&self) -> PathBuf {
        self.root.join("intents/intents.json")
    }
    pub fn intents_dir(&self) -> PathBuf {
        self.root.join("intents")
    }
    pub fn prompts_dir(&self) -> PathBuf {
        self.root.join("prompts")
    }
    pub fn prompt_index(&self) -> PathBuf {
        self.root.join("prompts/index.json")
    }
    pub fn cache(&self) -> PathBuf {
        self.root.join("cache")
    }
    pub fn manifest(&self, backend: &str) -> PathBuf {
        self.root.join("runs").join(backend).join("manifest.json")
    }
    pub fn runs_dir(&self) -> PathBuf {
        self.root.join("runs")
    }
    pub fn measurements(&self) -> PathBuf {
        self.root.join("scores/measurements.json")
    }
    pub fn analysis(&self, name: &str) -> PathBuf {
        self.root.join("analysis").join(name)
    }
    pub fn study(&self) -> PathBuf {
        self.root.join("humeval/study")
    }
    pub fn humeval(&self, name: &str) -> PathBuf {
        self.root.join("humeval").join(name)
    }
    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("report").join(name)
    }
}

/// Read a stage artifact, naming the stage that produces it when absent.
pub fn load<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<Envelope<T>> {
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            stage,
        });
    }
    provenance::read_json(path)
}

pub fn save<T: Serialize>(path: &Path, prov: &Provenance, data: &T) -> Result<()> {
    provenance::write_json(path, prov, data)
}

pub fn save_text(path: &Path, text: &str) -> Result<()> {
    provenance::write_file(path, text.as_bytes())
}
