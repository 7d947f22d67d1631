use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use citegen_core::gateway::GenerationCache;
use citegen_core::metrics::{measure_all, MeasureInput, MeasurementVector, ModelMetric};
use citegen_core::promptgen::{baseline_text, BASELINE_LABEL};
use citegen_core::scorer::{score_vectors, MetricAvailability};
use citegen_core::{Error, Result};

use super::corpus::load_bundle;
use super::render::load_index;
use super::run::{load_manifest, run_backends};
use crate::artifacts::{load, save};
use crate::Ctx;

/// `scores/measurements.json`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub vectors: Vec<MeasurementVector>,
    pub availability: BTreeMap<ModelMetric, MetricAvailability>,
}

pub fn load_measurements(ctx: &Ctx) -> Result<Measurements> {
    Ok(load::<Measurements>(&ctx.layout.measurements(), "score")?.data)
}

/// Score every vector with the sidecar, or mark every model metric
/// unavailable when none is configured.
pub fn fill_model_metrics(
    ctx: &Ctx,
    vectors: &mut [MeasurementVector],
    golds: &[&str],
    outputs: &[&str],
) -> Result<BTreeMap<ModelMetric, MetricAvailability>> {
    let metrics: Vec<ModelMetric> = ctx
        .cfg
        .file
        .scorer
        .metrics
        .iter()
        .map(|m| m.parse())
        .collect::<Result<_>>()?;
    let mut out = match super::scorer(ctx) {
        Some(client) => score_vectors(&client, &metrics, vectors, golds, outputs)?,
        None => BTreeMap::new(),
    };
    for m in ModelMetric::ALL {
        out.entry(m).or_insert_with(|| MetricAvailability::Unavailable {
            reason: if ctx.cfg.file.scorer.url.is_none() {
                "no scorer configured".into()
            } else {
                "not requested".into()
            },
        });
    }
    Ok(out)
}

pub fn score(ctx: &Ctx) -> Result<()> {
    let bundle = load_bundle(ctx)?;
    let index = load_index(ctx)?;
    let cache = GenerationCache::open(ctx.layout.cache())?;
    let gold: BTreeMap<&str, String> = bundle
        .instances
        .iter()
        .map(|i| (i.instance_id.as_str(), i.gold_reference()))
        .collect();
    let mut inputs = Vec::new();
    for backend in run_backends(ctx)? {
        let m = load_manifest(ctx, &backend)?;
        if !m.is_complete() {
            return Err(Error::IncompleteRun {
                failed: m.failed(),
                total: m.total(),
            });
        }
        for cell in &m.cells {
            let rec = cache.get(&cell.key)?.ok_or_else(|| {
                Error::Cache(format!("generation {} for {}/{} is not cached", cell.key, cell.label, cell.instance_id))
            })?;
            let reference = gold.get(cell.instance_id.as_str()).ok_or_else(|| {
                Error::InvalidInput(format!("{} is not in the corpus bundle", cell.instance_id))
            })?;
            inputs.push(MeasureInput {
                instance_id: cell.instance_id.clone(),
                config: cell.label.clone(),
                backend_id: backend.clone(),
                source: format!("{}\n{}", rec.system, rec.user).trim().to_string(),
                output: rec.output_text,
                reference: reference.clone(),
            });
        }
        for id in &index.instances {
            let inst = bundle
                .instance(id)
                .ok_or_else(|| Error::InvalidInput(format!("{id} is not in the corpus bundle")))?;
            let text = baseline_text(inst)?;
            inputs.push(MeasureInput {
                instance_id: id.clone(),
                config: BASELINE_LABEL.to_string(),
                backend_id: backend.clone(),
                source: text.clone(),
                output: text,
                reference: gold[id.as_str()].clone(),
            });
        }
    }
    let mut vectors = measure_all(&inputs, ctx.exec);
    let golds: Vec<&str> = inputs.iter().map(|i| i.reference.as_str()).collect();
    let outputs: Vec<&str> = inputs.iter().map(|i| i.output.as_str()).collect();
    let availability = fill_model_metrics(ctx, &mut vectors, &golds, &outputs)?;
    let n = vectors.len();
    save(&ctx.layout.measurements(), ctx.prov(), &Measurements { vectors, availability: availability.clone() })?;
    let avail: Vec<String> = availability
        .iter()
        .map(|(m, a)| {
            let state = match a {
                MetricAvailability::Available { .. } => "available",
                MetricAvailability::Unavailable { .. } => "unavailable",
            };
            format!("{} {state}", m.column())
        })
        .collect();
    println!("score: {n} measurement vectors; {}", avail.join(", "));
    Ok(())
}
