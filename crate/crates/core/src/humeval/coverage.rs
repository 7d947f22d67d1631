use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::judgments::Judgment;
use super::tasks::TaskSet;
use crate::analysis::{pearson, pearson_p_value, CORRELATION_COLUMNS};
use crate::error::{Error, Result};
use crate::metrics::MeasurementVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateCoverage {
    pub task_id: String,
    pub instance_id: String,
    pub backend_id: String,
    pub config: String,
    pub generation_key: String,
    /// Covered facts over total facts, averaged over annotators.
    pub coverage: f64,
    pub annotators: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub backend_id: String,
    pub config: String,
    pub n: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub candidates: Vec<CandidateCoverage>,
    pub rows: Vec<CoverageRow>,
    /// Tasks without any judgment; only non-empty for partial reports.
    pub unjudged: Vec<String>,
    pub partial: bool,
}

/// Ratio of covered facts for one candidate row of a grid.
pub fn coverage_ratio(row: &BTreeMap<String, bool>) -> f64 {
    if row.is_empty() {
        return 0.0;
    }
    row.values().filter(|v| **v).count() as f64 / row.len() as f64
}

/// Per-candidate coverage averaged over annotators, then unblinded and
/// averaged per (backend, config). `judgments` should hold the latest
/// version per (task, annotator).
pub fn coverage(set: &TaskSet, judgments: &[&Judgment], allow_partial: bool) -> Result<CoverageReport> {
    let mut by_task: BTreeMap<&str, Vec<&Judgment>> = BTreeMap::new();
    for j in judgments {
        if set.task(&j.task_id).is_none() {
            return Err(Error::Judgment(format!("judgment for unknown task {}", j.task_id)));
        }
        by_task.entry(j.task_id.as_str()).or_default().push(j);
    }
    let mut unjudged = Vec::new();
    let mut candidates = Vec::new();
    for task in &set.tasks {
        let Some(js) = by_task.get(task.task_id.as_str()) else {
            unjudged.push(task.task_id.clone());
            continue;
        };
        for label in task.blind_labels() {
            let mut sum = 0.0;
            for j in js {
                let row = j.covered.get(label).ok_or_else(|| {
                    Error::Judgment(format!("{} by {} lacks candidate {label}", j.task_id, j.annotator_id))
                })?;
                if row.len() != task.facts.len() {
                    return Err(Error::Judgment(format!(
                        "{} by {}: candidate {label} has {} of {} decisions",
                        j.task_id,
                        j.annotator_id,
                        row.len(),
                        task.facts.len()
                    )));
                }
                sum += coverage_ratio(row);
            }
            let entry = set.sealed.lookup(&task.task_id, label).ok_or_else(|| {
                Error::Judgment(format!("no sealed entry for {}/{label}", task.task_id))
            })?;
            candidates.push(CandidateCoverage {
                task_id: task.task_id.clone(),
                instance_id: task.instance_id.clone(),
                backend_id: entry.backend_id.clone(),
                config: entry.config.clone(),
                generation_key: entry.generation_key.clone(),
                coverage: sum / js.len() as f64,
                annotators: js.len(),
            });
        }
    }
    if !unjudged.is_empty() && !allow_partial {
        return Err(Error::Judgment(format!(
            "{} of {} tasks have no judgment (first: {})",
            unjudged.len(),
            set.tasks.len(),
            unjudged[0]
        )));
    }
    let mut groups: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for c in &candidates {
        groups
            .entry((c.backend_id.as_str(), c.config.as_str()))
            .or_default()
            .push(c.coverage);
    }
    let rows = groups
        .into_iter()
        .map(|((b, c), xs)| CoverageRow {
            backend_id: b.to_string(),
            config: c.to_string(),
            n: xs.len(),
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
        })
        .collect();
    let partial = !unjudged.is_empty();
    Ok(CoverageReport {
        candidates,
        rows,
        unjudged,
        partial,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanMetricRow {
    pub metric: String,
    pub n: usize,
    pub r: Option<f64>,
    pub p_value: Option<f64>,
}

/// Pearson correlation between candidate coverage and each metric, pairing
/// candidates with measurements on (backend, config, instance).
pub fn human_metric_correlation(
    candidates: &[CandidateCoverage],
    vectors: &[MeasurementVector],
) -> Vec<HumanMetricRow> {
    let index: BTreeMap<(&str, &str, &str), &MeasurementVector> = vectors
        .iter()
        .map(|v| ((v.backend_id.as_str(), v.config.as_str(), v.instance_id.as_str()), v))
        .collect();
    CORRELATION_COLUMNS
        .iter()
        .map(|metric| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = candidates
                .iter()
                .filter_map(|c| {
                    let v = index.get(&(c.backend_id.as_str(), c.config.as_str(), c.instance_id.as_str()))?;
                    Some((c.coverage, v.column(metric)?))
                })
                .unzip();
            let r = pearson(&xs, &ys);
            HumanMetricRow {
                metric: metric.to_string(),
                n: xs.len(),
                r,
                p_value: r.and_then(|r| pearson_p_value(r, xs.len())),
            }
        })
        .collect()
}
