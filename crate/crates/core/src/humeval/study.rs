use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::compose::{ComposeItem, HumanGeneration};
use super::facts::CurationQueue;
use super::judgments::JudgmentStore;
use super::tasks::TaskSet;
use crate::error::{Error, Result};

pub const TASKS_FILE: &str = "tasks.json";
pub const FACTS_FILE: &str = "facts.json";
pub const COMPOSE_FILE: &str = "compose.json";
pub const ANNOTATORS_FILE: &str = "annotators.json";
pub const JUDGMENTS_FILE: &str = "judgments.jsonl";
pub const HUMAN_FILE: &str = "human.jsonl";

/// Everything the evaluation service works on, kept as plain files in one
/// directory. `tasks.json` holds the sealed table and is never served.
#[derive(Debug)]
pub struct Study {
    dir: PathBuf,
    pub tasks: TaskSet,
    pub facts: CurationQueue,
    pub compose: Vec<ComposeItem>,
    /// token -> annotator id
    pub annotators: BTreeMap<String, String>,
    pub judgments: JudgmentStore,
    pub human: Vec<HumanGeneration>,
}

fn read<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

fn write<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))?;
    text.push('\n');
    let tmp = path.with_extension("tmp");
    let werr = |source| Error::Write {
        path: path.to_path_buf(),
        source,
    };
    std::fs::write(&tmp, text).map_err(werr)?;
    std::fs::rename(&tmp, path).map_err(werr)
}

impl Study {
    pub fn create(
        dir: impl AsRef<Path>,
        tasks: TaskSet,
        facts: CurationQueue,
        compose: Vec<ComposeItem>,
        annotators: BTreeMap<String, String>,
    ) -> Result<Study> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|source| Error::Write {
            path: dir.clone(),
            source,
        })?;
        write(&dir.join(TASKS_FILE), &tasks)?;
        write(&dir.join(FACTS_FILE), &facts)?;
        write(&dir.join(COMPOSE_FILE), &compose)?;
        write(&dir.join(ANNOTATORS_FILE), &annotators)?;
        Study::open(dir)
    }

    pub fn open(dir: impl AsRef<Path>) -> Result<Study> {
        let dir = dir.as_ref().to_path_buf();
        let need = |name: &str| -> Result<PathBuf> {
            let p = dir.join(name);
            if p.exists() {
                Ok(p)
            } else {
                Err(Error::MissingArtifact {
                    path: p,
                    stage: "humeval init",
                })
            }
        };
        let tasks = read(&need(TASKS_FILE)?)?;
        let facts = read(&need(FACTS_FILE)?)?;
        let compose = read(&need(COMPOSE_FILE)?)?;
        let annotators = read(&need(ANNOTATORS_FILE)?)?;
        let judgments = JudgmentStore::open(dir.join(JUDGMENTS_FILE))?;
        let human_path = dir.join(HUMAN_FILE);
        let mut human = Vec::new();
        if human_path.exists() {
            let text = std::fs::read_to_string(&human_path).map_err(|source| Error::Read {
                path: human_path.clone(),
                source,
            })?;
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                human.push(serde_json::from_str(line).map_err(|e| Error::json(HUMAN_FILE, e))?);
            }
        }
        Ok(Study {
            dir,
            tasks,
            facts,
            compose,
            annotators,
            judgments,
            human,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn annotator_for_token(&self, token: &str) -> Option<&str> {
        self.annotators.get(token).map(String::as_str)
    }

    pub fn save_facts(&self) -> Result<()> {
        write(&self.dir.join(FACTS_FILE), &self.facts)
    }

    pub fn save_tasks(&self) -> Result<()> {
        write(&self.dir.join(TASKS_FILE), &self.tasks)
    }

    pub fn add_human(&mut self, g: HumanGeneration) -> Result<()> {
        let path = self.dir.join(HUMAN_FILE);
        let mut line = serde_json::to_string(&g).map_err(|e| Error::json(HUMAN_FILE, e))?;
        line.push('\n');
        let werr = |source| Error::Write {
            path: path.clone(),
            source,
        };
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(werr)?
            .write_all(line.as_bytes())
            .map_err(werr)?;
        self.human.push(g);
        Ok(())
    }
}
