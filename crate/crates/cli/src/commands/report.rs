use serde::Serialize;

use citegen_core::analysis::{
    aggregate, aggregate_csv, correlation_report, correlations_csv, length_bin_csv,
    significance_csv, winner_census, winner_census_csv,
};
use citegen_core::provenance::{ensure_consistent, Provenance};
use citegen_core::Result;

use super::analyze::{free_form_share, length_bin_reports, significance_rows};
use super::humeval::coverage_outputs;
use super::render::load_index;
use super::run::run_backends;
use super::score::load_measurements;
use crate::artifacts::{load, save, save_text};
use crate::Ctx;

#[derive(Debug, Serialize)]
struct Summary {
    instances: usize,
    measurements: usize,
    backends: Vec<String>,
    census_measurements: usize,
    free_form_share_percent: f64,
    files: Vec<String>,
}

/// Provenance of every artifact present, checked for a single tool version
/// and config hash.
fn upstream_provenance(ctx: &Ctx) -> Result<Option<Provenance>> {
    let l = &ctx.layout;
    let mut paths = vec![l.bundle(), l.examples(), l.intents(), l.prompt_index(), l.measurements()];
    for b in run_backends(ctx).unwrap_or_default() {
        paths.push(l.manifest(&b));
    }
    paths.push(l.humeval("coverage.json"));
    let mut found = Vec::new();
    for p in paths.into_iter().filter(|p| p.exists()) {
        let env = load::<serde_json::Value>(&p, "report")?;
        found.push((p.display().to_string(), env.provenance));
    }
    // artifacts must also come from the configuration this report runs under
    let current = ("current configuration", ctx.prov());
    ensure_consistent(std::iter::once(current).chain(found.iter().map(|(p, v)| (p.as_str(), v))))
}

pub fn report(ctx: &Ctx) -> Result<()> {
    upstream_provenance(ctx)?;
    let m = load_measurements(ctx)?;
    let prov = ctx.prov();
    let a = &ctx.cfg.file.analysis;
    let table = aggregate(&m.vectors, false)?;
    let census = winner_census(&table);
    let mut files: Vec<(String, String)> = vec![
        ("aggregate.csv".into(), aggregate_csv(&table, prov)?),
        ("correlations.csv".into(), correlations_csv(&correlation_report(&m.vectors), prov)?),
        ("winner_census.csv".into(), winner_census_csv(&census, prov)?),
    ];
    let mut sig = Vec::new();
    for (x, y) in &a.comparisons {
        sig.extend(significance_rows(ctx, &m.vectors, x, y, None, None)?);
    }
    if !sig.is_empty() {
        files.push(("significance.csv".into(), significance_csv(&sig, prov)?));
    }
    if let Some(lb) = &a.length_bin {
        let index = load_index(ctx)?;
        let reps = length_bin_reports(ctx, &m.vectors, &index, &lb.a, &lb.b, &lb.threshold, None)?;
        files.push(("length_bin.csv".into(), length_bin_csv(&reps, prov)?));
    }
    if ctx.layout.study().join(citegen_core::humeval::study::TASKS_FILE).exists() {
        files.extend(coverage_outputs(ctx, true)?);
    }
    for (name, text) in &files {
        save_text(&ctx.layout.report(name), text)?;
    }
    let mut backends: Vec<String> = m.vectors.iter().map(|v| v.backend_id.clone()).collect();
    backends.sort();
    backends.dedup();
    let summary = Summary {
        instances: table.instances.len(),
        measurements: m.vectors.len(),
        backends,
        census_measurements: census.measurements(),
        free_form_share_percent: free_form_share(&census),
        files: files.iter().map(|(n, _)| n.clone()).collect(),
    };
    save(&ctx.layout.report("summary.json"), prov, &summary)?;
    println!("report: {} files in {}", files.len() + 1, ctx.layout.report("").display());
    Ok(())
}
