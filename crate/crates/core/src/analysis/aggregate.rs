use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{MeasurementVector, METRIC_COLUMNS};
use crate::promptgen::{ComponentSet, PromptConfig, BASELINE_LABEL};

/// Columns reported on a 0-100 scale.
const PERCENT_COLUMNS: [&str; 10] = [
    "NG-1", "NG-2", "NG-3", "CM", "ROUGE-L", "BERTScore", "SciBERTScore", "BLEURT", "TRUE", "SummaC",
];
/// Columns the baseline row leaves empty.
const NOT_FOR_BASELINE: [&str; 5] = ["NG-1", "NG-2", "NG-3", "PC", "CM"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Value(f64),
    /// Model-based metric the scorer could not provide.
    Unavailable,
    /// Not defined for this row.
    Blank,
}

impl Cell {
    pub fn value(&self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(*v),
            _ => None,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Cell::Value(v) => format!("{v:.2}"),
            Cell::Unavailable => "unavailable".into(),
            Cell::Blank => "-".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub backend_id: String,
    pub config: String,
    pub n: usize,
    pub cells: BTreeMap<String, Cell>,
}

impl AggregateRow {
    pub fn cell(&self, column: &str) -> &Cell {
        self.cells.get(column).unwrap_or(&Cell::Blank)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub columns: Vec<String>,
    pub rows: Vec<AggregateRow>,
    /// Instances each row was averaged over.
    pub instances: Vec<String>,
    /// Cells dropped by masking, as (row label, instance id).
    pub masked: Vec<(String, String)>,
}

impl AggregateTable {
    pub fn row(&self, backend_id: &str, config: &str) -> Option<&AggregateRow> {
        self.rows
            .iter()
            .find(|r| r.backend_id == backend_id && r.config == config)
    }
}

/// Table row order: template, then component set, with
/// the baseline last.
pub fn config_sort_key(config: &str) -> (u8, u8, usize, String) {
    if config == BASELINE_LABEL {
        return (1, 0, 0, String::new());
    }
    match config.parse::<PromptConfig>() {
        Ok(c) => {
            let sets = ComponentSet::study_sets();
            let pos = sets.iter().position(|s| *s == c.components()).unwrap_or(sets.len());
            (0, c.template_id, pos, config.to_string())
        }
        Err(_) => (2, 0, 0, config.to_string()),
    }
}

fn row_label(backend: &str, config: &str) -> String {
    format!("{backend}/{config}")
}

/// Mean of every column per (backend, config). Every row must cover the same
/// instances; with `mask` the table is restricted to the common instances.
pub fn aggregate(vectors: &[MeasurementVector], mask: bool) -> Result<AggregateTable> {
    if vectors.is_empty() {
        return Err(Error::InvalidInput("no measurement vectors".into()));
    }
    let mut grid: BTreeMap<(String, String), BTreeMap<String, &MeasurementVector>> = BTreeMap::new();
    for v in vectors {
        let row = grid
            .entry((v.backend_id.clone(), v.config.clone()))
            .or_default();
        if row.insert(v.instance_id.clone(), v).is_some() {
            return Err(Error::InvalidInput(format!(
                "duplicate measurement for {} on {}",
                v.instance_id,
                row_label(&v.backend_id, &v.config)
            )));
        }
    }
    let union: BTreeSet<&String> = grid.values().flat_map(|r| r.keys()).collect();
    let mut missing = Vec::new();
    for ((b, c), row) in &grid {
        for inst in &union {
            if !row.contains_key(*inst) {
                missing.push((row_label(b, c), (*inst).clone()));
            }
        }
    }
    if !missing.is_empty() && !mask {
        return Err(Error::RaggedGrid { missing });
    }
    let common: Vec<String> = union
        .iter()
        .filter(|i| grid.values().all(|r| r.contains_key(**i)))
        .map(|i| (*i).clone())
        .collect();
    if common.is_empty() {
        return Err(Error::InvalidInput("rows share no instances".into()));
    }

    let mut rows = Vec::new();
    for ((backend, config), row) in &grid {
        let members: Vec<&MeasurementVector> = common.iter().map(|i| row[i]).collect();
        let mut cells = BTreeMap::new();
        for col in METRIC_COLUMNS {
            let cell = if config == BASELINE_LABEL && NOT_FOR_BASELINE.contains(&col) {
                Cell::Blank
            } else {
                match members.iter().map(|v| v.column(col)).collect::<Option<Vec<f64>>>() {
                    Some(xs) => {
                        let m = xs.iter().sum::<f64>() / xs.len() as f64;
                        let scale = if PERCENT_COLUMNS.contains(&col) { 100.0 } else { 1.0 };
                        Cell::Value(m * scale)
                    }
                    None => Cell::Unavailable,
                }
            };
            cells.insert(col.to_string(), cell);
        }
        rows.push(AggregateRow {
            backend_id: backend.clone(),
            config: config.clone(),
            n: members.len(),
            cells,
        });
    }
    rows.sort_by(|a, b| {
        (&a.backend_id, config_sort_key(&a.config)).cmp(&(&b.backend_id, config_sort_key(&b.config)))
    });
    Ok(AggregateTable {
        columns: METRIC_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows,
        instances: common,
        masked: missing,
    })
}

/// Metrics the winner census ranks configurations by.
pub const CENSUS_METRICS: [&str; 6] = ["ROUGE-L", "BERTScore", "SciBERTScore", "BLEURT", "TRUE", "SummaC"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusCell {
    pub backend_id: String,
    pub template_id: u8,
    pub metric: String,
    pub winner: String,
    pub value: f64,
    /// Other configurations with exactly the winning value.
    pub tied_with: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinnerCensus {
    pub cells: Vec<CensusCell>,
    /// Component set (e.g. `A+IF+E`) → cells won.
    pub wins_by_components: BTreeMap<String, usize>,
}

impl WinnerCensus {
    pub fn measurements(&self) -> usize {
        self.cells.len()
    }

    /// Share (0-100) of cells won by a configuration whose components
    /// satisfy `pred`.
    pub fn share_where(&self, pred: impl Fn(&ComponentSet) -> bool) -> f64 {
        if self.cells.is_empty() {
            return 0.0;
        }
        let won = self
            .cells
            .iter()
            .filter(|c| c.winner.parse::<PromptConfig>().is_ok_and(|p| pred(&p.components())))
            .count();
        100.0 * won as f64 / self.cells.len() as f64
    }
}

/// For each backend, template and metric, the configuration with the highest
/// mean. Exact ties go to the first configuration in table order and are
/// listed. Metrics without values are skipped.
pub fn winner_census(table: &AggregateTable) -> WinnerCensus {
    let mut groups: BTreeMap<(String, u8), Vec<(&AggregateRow, PromptConfig)>> = BTreeMap::new();
    for row in &table.rows {
        if let Ok(cfg) = row.config.parse::<PromptConfig>() {
            groups
                .entry((row.backend_id.clone(), cfg.template_id))
                .or_default()
                .push((row, cfg));
        }
    }
    let mut cells = Vec::new();
    let mut wins: BTreeMap<String, usize> = BTreeMap::new();
    for ((backend, template), rows) in &groups {
        for metric in CENSUS_METRICS {
            let scored: Vec<(&AggregateRow, f64)> = rows
                .iter()
                .filter_map(|(r, _)| r.cell(metric).value().map(|v| (*r, v)))
                .collect();
            if scored.len() != rows.len() || scored.is_empty() {
                continue;
            }
            let best = scored.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
            let mut top: Vec<&AggregateRow> = scored
                .iter()
                .filter(|(_, v)| *v == best)
                .map(|(r, _)| *r)
                .collect();
            top.sort_by_key(|r| config_sort_key(&r.config));
            let winner = top[0];
            let comps = winner
                .config
                .parse::<PromptConfig>()
                .map(|c| c.components().to_string())
                .unwrap_or_default();
            *wins.entry(comps).or_default() += 1;
            cells.push(CensusCell {
                backend_id: backend.clone(),
                template_id: *template,
                metric: metric.to_string(),
                winner: winner.config.clone(),
                value: best,
                tied_with: top[1..].iter().map(|r| r.config.clone()).collect(),
            });
        }
    }
    WinnerCensus {
        cells,
        wins_by_components: wins,
    }
}
