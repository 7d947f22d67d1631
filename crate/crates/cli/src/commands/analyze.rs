use std::collections::{BTreeMap, BTreeSet};

use citegen_core::analysis::{
    aggregate, aggregate_csv, compare_configs, correlation_report, correlations_csv,
    length_bin_compare, length_bin_csv, significance_csv, winner_census, winner_census_csv,
    BootstrapResult, LengthBinReport, LengthThreshold, WinnerCensus, SIGNIFICANCE_METRICS,
};
use citegen_core::metrics::{MeasurementVector, ModelMetric};
use citegen_core::promptgen::{ComponentSet, IntentChoice, PromptConfig};
use citegen_core::{Error, Result};

use super::render::{load_index, PromptIndex};
use super::score::load_measurements;
use crate::artifacts::save_text;
use crate::{AnalyzeCmd, Ctx};

/// Accepts column names ("ROUGE-L") and loose spellings ("rouge_l", "true_nli").
pub fn resolve_metric(name: &str) -> Result<&'static str> {
    if let Ok(m) = name.parse::<ModelMetric>() {
        return Ok(m.column());
    }
    let norm = |s: &str| s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
    SIGNIFICANCE_METRICS
        .iter()
        .find(|m| norm(m) == norm(name))
        .copied()
        .ok_or_else(|| {
            Error::InvalidInput(format!(
                "unknown metric {name:?}; expected one of {}",
                SIGNIFICANCE_METRICS.join(", ")
            ))
        })
}

fn backends(vectors: &[MeasurementVector], only: Option<&str>) -> Result<Vec<String>> {
    let all: BTreeSet<&str> = vectors.iter().map(|v| v.backend_id.as_str()).collect();
    match only {
        Some(b) if all.contains(b) => Ok(vec![b.to_string()]),
        Some(b) => Err(Error::InvalidInput(format!("no measurements for backend {b}"))),
        None => Ok(all.into_iter().map(String::from).collect()),
    }
}

pub fn significance_rows(
    ctx: &Ctx,
    vectors: &[MeasurementVector],
    a: &str,
    b: &str,
    metric: Option<&str>,
    backend: Option<&str>,
) -> Result<Vec<(String, BootstrapResult)>> {
    let a: PromptConfig = a.parse()?;
    let b: PromptConfig = b.parse()?;
    let metric = metric.map(resolve_metric).transpose()?;
    let params = ctx.cfg.file.analysis.bootstrap();
    let mut rows = Vec::new();
    for be in backends(vectors, backend)? {
        for r in compare_configs(vectors, &be, &a.to_string(), &b.to_string(), &params, ctx.exec)? {
            if metric.is_none_or(|m| m == r.metric) {
                rows.push((be.clone(), r));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("no metric has values for both configurations".into()));
    }
    Ok(rows)
}

pub fn prompt_lengths(index: &PromptIndex) -> BTreeMap<(String, String), usize> {
    index
        .prompts
        .iter()
        .map(|p| ((p.config.to_string(), p.instance_id.clone()), p.token_estimate))
        .collect()
}

pub fn length_bin_reports(
    ctx: &Ctx,
    vectors: &[MeasurementVector],
    index: &PromptIndex,
    a: &str,
    b: &str,
    threshold: &str,
    backend: Option<&str>,
) -> Result<Vec<LengthBinReport>> {
    let threshold = if threshold == "mean" {
        LengthThreshold::Mean
    } else {
        LengthThreshold::Tokens(threshold.parse().map_err(|_| {
            Error::InvalidInput(format!("threshold {threshold:?} is neither a number nor \"mean\""))
        })?)
    };
    let a = a.parse::<PromptConfig>()?.to_string();
    let b = b.parse::<PromptConfig>()?.to_string();
    let lengths = prompt_lengths(index);
    let params = ctx.cfg.file.analysis.bootstrap();
    backends(vectors, backend)?
        .iter()
        .map(|be| length_bin_compare(vectors, be, &a, &b, &lengths, threshold, &params, ctx.exec))
        .collect()
}

/// Percentage of census cells won by a configuration with a free-form intent.
pub fn free_form_share(census: &WinnerCensus) -> f64 {
    census.share_where(|c: &ComponentSet| c.intent == IntentChoice::FreeForm)
}

pub fn analyze(ctx: &Ctx, cmd: AnalyzeCmd) -> Result<()> {
    let m = load_measurements(ctx)?;
    let prov = ctx.prov();
    match cmd {
        AnalyzeCmd::Aggregate { mask } => {
            let table = aggregate(&m.vectors, mask)?;
            save_text(&ctx.layout.analysis("aggregate.csv"), &aggregate_csv(&table, prov)?)?;
            println!(
                "aggregate: {} rows over {} instances ({} masked cells)",
                table.rows.len(),
                table.instances.len(),
                table.masked.len()
            );
        }
        AnalyzeCmd::Correlations => {
            let ms = correlation_report(&m.vectors);
            save_text(&ctx.layout.analysis("correlations.csv"), &correlations_csv(&ms, prov)?)?;
            println!("correlations: {} matrices", ms.len());
        }
        AnalyzeCmd::Significance { a, b, metric, backend } => {
            let rows = significance_rows(ctx, &m.vectors, &a, &b, metric.as_deref(), backend.as_deref())?;
            save_text(&ctx.layout.analysis("significance.csv"), &significance_csv(&rows, prov)?)?;
            for (be, r) in &rows {
                println!(
                    "{be} {} vs {} {}: mean {:.4} vs {:.4}, p = {:.4}",
                    r.system_a, r.system_b, r.metric, r.mean_a, r.mean_b, r.p_value
                );
            }
        }
        AnalyzeCmd::LengthBin { a, b, threshold, backend } => {
            let index = load_index(ctx)?;
            let reps = length_bin_reports(ctx, &m.vectors, &index, &a, &b, &threshold, backend.as_deref())?;
            save_text(&ctx.layout.analysis("length_bin.csv"), &length_bin_csv(&reps, prov)?)?;
            for r in &reps {
                println!(
                    "{}: threshold {:.1}, {} long {} vs {} short {}",
                    r.backend_id, r.threshold, r.n_a, r.config_a, r.n_b, r.config_b
                );
            }
        }
        AnalyzeCmd::Census => {
            let census = winner_census(&aggregate(&m.vectors, false)?);
            save_text(&ctx.layout.analysis("winner_census.csv"), &winner_census_csv(&census, prov)?)?;
            println!(
                "census: {} measurements, {:.2}% won by a free-form intent configuration",
                census.measurements(),
                free_form_share(&census)
            );
        }
    }
    Ok(())
}
