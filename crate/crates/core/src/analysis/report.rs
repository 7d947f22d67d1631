//! CSV renderings of the analysis outputs. Each file opens with a
//! provenance comment line.

use crate::error::{Error, Result};
use crate::provenance::Provenance;

use super::{AggregateTable, BootstrapResult, CorrelationMatrix, LengthBinReport, WinnerCensus};

/// CSV text with the provenance comment line first.
pub fn csv_with_provenance(provenance: &Provenance, rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row)
            .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    }
    let body = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    let mut out = provenance.csv_comment();
    out.push('\n');
    out.push_str(&String::from_utf8_lossy(&body));
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "null".to_string(), |x| format!("{x:.6}"))
}

pub fn aggregate_csv(table: &AggregateTable, provenance: &Provenance) -> Result<String> {
    let mut rows = Vec::with_capacity(table.rows.len() + 1);
    let mut header = vec!["backend".to_string(), "config".into(), "n".into()];
    header.extend(table.columns.iter().cloned());
    rows.push(header);
    for r in &table.rows {
        let mut row = vec![r.backend_id.clone(), r.config.clone(), r.n.to_string()];
        row.extend(table.columns.iter().map(|c| r.cell(c).render()));
        rows.push(row);
    }
    csv_with_provenance(provenance, rows)
}

/// Long format, one line per matrix cell; undefined coefficients are `null`.
pub fn correlations_csv(matrices: &[CorrelationMatrix], provenance: &Provenance) -> Result<String> {
    let mut rows = vec![["scope", "n", "row", "column", "r", "p_value"].map(String::from).to_vec()];
    for m in matrices {
        for (i, a) in m.columns.iter().enumerate() {
            for (j, b) in m.columns.iter().enumerate() {
                rows.push(vec![
                    m.scope.clone(),
                    m.n.to_string(),
                    a.clone(),
                    b.clone(),
                    opt(m.r[i][j]),
                    opt(m.p[i][j]),
                ]);
            }
        }
    }
    csv_with_provenance(provenance, rows)
}

/// One line per (backend, result).
pub fn significance_csv(results: &[(String, BootstrapResult)], provenance: &Provenance) -> Result<String> {
    let mut rows = vec![[
        "backend", "system_a", "system_b", "metric", "n", "mean_a", "mean_b", "p_value",
        "a_significantly_better", "resamples", "sample_ratio", "seed",
    ]
    .map(String::from)
    .to_vec()];
    for (backend_id, r) in results {
        rows.push(vec![
            backend_id.clone(),
            r.system_a.clone(),
            r.system_b.clone(),
            r.metric.clone(),
            r.n.to_string(),
            format!("{:.6}", r.mean_a),
            format!("{:.6}", r.mean_b),
            format!("{:.4}", r.p_value),
            r.a_significantly_better().to_string(),
            r.resamples.to_string(),
            r.sample_ratio.to_string(),
            r.seed.to_string(),
        ]);
    }
    csv_with_provenance(provenance, rows)
}

pub fn length_bin_csv(reports: &[LengthBinReport], provenance: &Provenance) -> Result<String> {
    let mut rows = vec![[
        "backend", "config_a", "config_b", "threshold", "n_long_a", "n_short_b", "metric",
        "mean_long_a", "mean_short_b", "p_value",
    ]
    .map(String::from)
    .to_vec()];
    for (report, m) in reports.iter().flat_map(|r| r.metrics.iter().map(move |m| (r, m))) {
        rows.push(vec![
            report.backend_id.clone(),
            report.config_a.clone(),
            report.config_b.clone(),
            format!("{:.2}", report.threshold),
            report.n_a.to_string(),
            report.n_b.to_string(),
            m.metric.clone(),
            format!("{:.6}", m.mean_long_a),
            format!("{:.6}", m.mean_short_b),
            format!("{:.4}", m.p_value),
        ]);
    }
    csv_with_provenance(provenance, rows)
}

pub fn winner_census_csv(census: &WinnerCensus, provenance: &Provenance) -> Result<String> {
    let mut rows = vec![["backend", "template", "metric", "winner", "value", "tied_with"]
        .map(String::from)
        .to_vec()];
    for c in &census.cells {
        rows.push(vec![
            c.backend_id.clone(),
            c.template_id.to_string(),
            c.metric.clone(),
            c.winner.clone(),
            format!("{:.2}", c.value),
            c.tied_with.join(";"),
        ]);
    }
    csv_with_provenance(provenance, rows)
}
