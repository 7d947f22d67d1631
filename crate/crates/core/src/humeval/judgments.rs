use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::tasks::PyramidTask;
use crate::error::{Error, Result};

/// blind label -> fact id -> covered
pub type CoverageGrid = BTreeMap<String, BTreeMap<String, bool>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub task_id: String,
    pub annotator_id: String,
    /// 1 for the first submission by this annotator on this task.
    pub version: u32,
    pub covered: CoverageGrid,
    pub submitted_at: String,
}

/// The grid must cover every candidate and every fact of the task, and
/// nothing else.
pub fn validate_grid(task: &PyramidTask, grid: &CoverageGrid) -> Result<()> {
    let labels: Vec<&str> = task.blind_labels().collect();
    for label in grid.keys() {
        if !labels.contains(&label.as_str()) {
            return Err(Error::Judgment(format!("unknown candidate {label:?} in {}", task.task_id)));
        }
    }
    for label in labels {
        let row = grid
            .get(label)
            .ok_or_else(|| Error::Judgment(format!("candidate {label} not judged")))?;
        for id in row.keys() {
            if !task.facts.iter().any(|f| &f.fact_id == id) {
                return Err(Error::Judgment(format!("unknown fact {id:?} for candidate {label}")));
            }
        }
        for f in &task.facts {
            if !row.contains_key(&f.fact_id) {
                return Err(Error::Judgment(format!(
                    "candidate {label} has no decision for fact {}",
                    f.fact_id
                )));
            }
        }
    }
    Ok(())
}

/// Append-only judgment log, optionally mirrored to a JSON-lines file.
#[derive(Debug, Default)]
pub struct JudgmentStore {
    path: Option<PathBuf>,
    judgments: Vec<Judgment>,
}

impl JudgmentStore {
    pub fn in_memory() -> Self {
        JudgmentStore::default()
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut judgments = Vec::new();
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|source| Error::Read {
                path: path.clone(),
                source,
            })?;
            for (n, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let j: Judgment = serde_json::from_str(line)
                    .map_err(|e| Error::json(format!("{} line {}", path.display(), n + 1), e))?;
                judgments.push(j);
            }
        }
        Ok(JudgmentStore {
            path: Some(path),
            judgments,
        })
    }

    pub fn all(&self) -> &[Judgment] {
        &self.judgments
    }

    /// Validate and append; a resubmission gets the next version number.
    pub fn submit(
        &mut self,
        task: &PyramidTask,
        annotator_id: &str,
        covered: CoverageGrid,
        submitted_at: String,
    ) -> Result<Judgment> {
        if annotator_id.trim().is_empty() {
            return Err(Error::Judgment("annotator id is empty".into()));
        }
        validate_grid(task, &covered)?;
        let version = self
            .judgments
            .iter()
            .filter(|j| j.task_id == task.task_id && j.annotator_id == annotator_id)
            .map(|j| j.version)
            .max()
            .unwrap_or(0)
            + 1;
        let j = Judgment {
            task_id: task.task_id.clone(),
            annotator_id: annotator_id.to_string(),
            version,
            covered,
            submitted_at,
        };
        if let Some(path) = &self.path {
            let mut line = serde_json::to_string(&j).map_err(|e| Error::json("judgment", e))?;
            line.push('\n');
            let write_err = |source| Error::Write {
                path: path.clone(),
                source,
            };
            let mut f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(write_err)?;
            f.write_all(line.as_bytes()).map_err(write_err)?;
        }
        self.judgments.push(j.clone());
        Ok(j)
    }

    /// Latest version per (task, annotator).
    pub fn latest(&self) -> Vec<&Judgment> {
        let mut by: BTreeMap<(&str, &str), &Judgment> = BTreeMap::new();
        for j in &self.judgments {
            let slot = by.entry((&j.task_id, &j.annotator_id)).or_insert(j);
            if j.version > slot.version {
                *slot = j;
            }
        }
        by.into_values().collect()
    }
}
