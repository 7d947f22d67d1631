//! Aggregate tables, correlations, significance tests and the length-bin
//! control comparison.

mod aggregate;
mod bootstrap;
mod correlate;
mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use aggregate::{
    aggregate, config_sort_key, winner_census, AggregateRow, AggregateTable, CensusCell, Cell,
    WinnerCensus, CENSUS_METRICS,
};
pub use bootstrap::{mean, paired_bootstrap, unpaired_bootstrap, BootstrapParams, BootstrapResult, CHUNK};
pub use report::{
    aggregate_csv, correlations_csv, csv_with_provenance, length_bin_csv, significance_csv, winner_census_csv,
};
pub use correlate::{
    correlation_report, pearson, pearson_matrix, pearson_p_value, CorrelationMatrix,
    CORRELATION_COLUMNS,
};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::metrics::MeasurementVector;

/// Per-instance metrics used for significance tests.
pub const SIGNIFICANCE_METRICS: [&str; 7] = [
    "ROUGE-L",
    "BERTScore",
    "SciBERTScore",
    "BLEURT",
    "TRUE",
    "SummaC",
    "WC",
];

fn select<'a>(vectors: &'a [MeasurementVector], backend: &str, config: &str) -> BTreeMap<&'a str, &'a MeasurementVector> {
    vectors
        .iter()
        .filter(|v| v.backend_id == backend && v.config == config)
        .map(|v| (v.instance_id.as_str(), v))
        .collect()
}

/// Paired bootstrap of `config_a` against `config_b` on one backend, for
/// every metric that has values on both sides.
pub fn compare_configs(
    vectors: &[MeasurementVector],
    backend: &str,
    config_a: &str,
    config_b: &str,
    params: &BootstrapParams,
    exec: Exec,
) -> Result<Vec<BootstrapResult>> {
    let a = select(vectors, backend, config_a);
    let b = select(vectors, backend, config_b);
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no measurements for {backend}/{} ",
            if a.is_empty() { config_a } else { config_b }
        )));
    }
    if a.keys().ne(b.keys()) {
        return Err(Error::InvalidInput(format!(
            "{config_a} and {config_b} cover different instances on {backend}"
        )));
    }
    let mut out = Vec::new();
    for metric in SIGNIFICANCE_METRICS {
        let xs: Option<Vec<f64>> = a.values().map(|v| v.column(metric)).collect();
        let ys: Option<Vec<f64>> = b.values().map(|v| v.column(metric)).collect();
        let (Some(xs), Some(ys)) = (xs, ys) else { continue };
        let p = paired_bootstrap(&xs, &ys, params, exec)?;
        out.push(BootstrapResult {
            system_a: config_a.to_string(),
            system_b: config_b.to_string(),
            metric: metric.to_string(),
            n: xs.len(),
            mean_a: mean(&xs),
            mean_b: mean(&ys),
            p_value: p,
            resamples: params.resamples,
            sample_ratio: params.ratio,
            seed: params.seed,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthThreshold {
    Tokens(f64),
    /// Mean prompt length over both configurations.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBinMetric {
    pub metric: String,
    pub mean_long_a: f64,
    pub mean_short_b: f64,
    /// Share of resamples in which the long-prompt A bin reaches the
    /// short-prompt B bin; small values mean B is better.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBinReport {
    pub backend_id: String,
    pub config_a: String,
    pub config_b: String,
    pub threshold: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub params: BootstrapParams,
    pub metrics: Vec<LengthBinMetric>,
}

/// Compare A's outputs whose prompts are longer than the threshold with B's
/// outputs whose prompts are at most the threshold. The two bins hold
/// different instances, so the test is an unpaired bootstrap.
#[allow(clippy::too_many_arguments)]
pub fn length_bin_compare(
    vectors: &[MeasurementVector],
    backend: &str,
    config_a: &str,
    config_b: &str,
    prompt_lengths: &BTreeMap<(String, String), usize>,
    threshold: LengthThreshold,
    params: &BootstrapParams,
    exec: Exec,
) -> Result<LengthBinReport> {
    let a = select(vectors, backend, config_a);
    let b = select(vectors, backend, config_b);
    let length = |cfg: &str, inst: &str| -> Result<f64> {
        prompt_lengths
            .get(&(cfg.to_string(), inst.to_string()))
            .map(|l| *l as f64)
            .ok_or_else(|| Error::InvalidInput(format!("no prompt length for {cfg}/{inst}")))
    };
    let thr = match threshold {
        LengthThreshold::Tokens(t) => t,
        LengthThreshold::Mean => {
            let mut all = Vec::new();
            for inst in a.keys() {
                all.push(length(config_a, inst)?);
            }
            for inst in b.keys() {
                all.push(length(config_b, inst)?);
            }
            if all.is_empty() {
                return Err(Error::InvalidInput("no prompt lengths".into()));
            }
            mean(&all)
        }
    };
    let mut long_a = Vec::new();
    for (inst, v) in &a {
        if length(config_a, inst)? > thr {
            long_a.push(*v);
        }
    }
    let mut short_b = Vec::new();
    for (inst, v) in &b {
        if length(config_b, inst)? <= thr {
            short_b.push(*v);
        }
    }
    if long_a.is_empty() || short_b.is_empty() {
        return Err(Error::InvalidInput(format!(
            "empty length bin at threshold {thr:.1}: {} long {config_a}, {} short {config_b}",
            long_a.len(),
            short_b.len()
        )));
    }
    let mut metrics = Vec::new();
    for metric in SIGNIFICANCE_METRICS {
        let xs: Option<Vec<f64>> = long_a.iter().map(|v| v.column(metric)).collect();
        let ys: Option<Vec<f64>> = short_b.iter().map(|v| v.column(metric)).collect();
        let (Some(xs), Some(ys)) = (xs, ys) else { continue };
        metrics.push(LengthBinMetric {
            metric: metric.to_string(),
            mean_long_a: mean(&xs),
            mean_short_b: mean(&ys),
            p_value: unpaired_bootstrap(&ys, &xs, params, exec)?,
        });
    }
    Ok(LengthBinReport {
        backend_id: backend.to_string(),
        config_a: config_a.to_string(),
        config_b: config_b.to_string(),
        threshold: thr,
        n_a: long_a.len(),
        n_b: short_b.len(),
        params: *params,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{measure, MeasureInput};

    fn v(config: &str, inst: &str, output: &str) -> MeasurementVector {
        measure(&MeasureInput {
            instance_id: inst.into(),
            config: config.into(),
            backend_id: "m".into(),
            source: "s".into(),
            output: output.into(),
            reference: "[REF#1] the gold paragraph text".into(),
        })
    }

    #[test]
    fn mean_threshold() {
        let vs = vec![v("6+A", "i1", "x"), v("6+A+IF+E", "i2", "[REF#1] the gold paragraph text")];
        let mut lens = BTreeMap::new();
        lens.insert(("6+A".to_string(), "i1".to_string()), 360);
        lens.insert(("6+A+IF+E".to_string(), "i2".to_string()), 300);
        let p = BootstrapParams { resamples: 200, ..BootstrapParams::default() };
        let r = length_bin_compare(&vs, "m", "6+A", "6+A+IF+E", &lens, LengthThreshold::Mean, &p, Exec::Sequential).unwrap();
        assert_eq!(r.threshold, 330.0);
        assert_eq!((r.n_a, r.n_b), (1, 1));
    }

    #[test]
    fn short_b_equal_to_reference_wins() {
        let mut vs = Vec::new();
        let mut lens = BTreeMap::new();
        for i in 0..20 {
            let id = format!("i{i}");
            vs.push(v("6+A", &id, "unrelated words entirely"));
            vs.push(v("6+A+IF+E", &id, "[REF#1] the gold paragraph text"));
            lens.insert(("6+A".to_string(), id.clone()), 400 + i);
            lens.insert(("6+A+IF+E".to_string(), id), 200 + i);
        }
        let p = BootstrapParams { resamples: 1000, ..BootstrapParams::default() };
        let r = length_bin_compare(&vs, "m", "6+A", "6+A+IF+E", &lens, LengthThreshold::Mean, &p, Exec::Parallel).unwrap();
        let rouge = r.metrics.iter().find(|m| m.metric == "ROUGE-L").unwrap();
        assert!(rouge.mean_short_b > rouge.mean_long_a);
        assert_eq!(rouge.p_value, 0.0);
    }

    #[test]
    fn empty_bin_is_error() {
        let vs = vec![v("6+A", "i1", "x"), v("6+A+IF+E", "i1", "y")];
        let mut lens = BTreeMap::new();
        lens.insert(("6+A".to_string(), "i1".to_string()), 100);
        lens.insert(("6+A+IF+E".to_string(), "i1".to_string()), 500);
        let p = BootstrapParams { resamples: 10, ..BootstrapParams::default() };
        assert!(length_bin_compare(&vs, "m", "6+A", "6+A+IF+E", &lens, LengthThreshold::Tokens(300.0), &p, Exec::Sequential).is_err());
    }

    #[test]
    fn compare_requires_same_instances() {
        let vs = vec![v("1+A", "i1", "x"), v("1+A", "i2", "x"), v("1+A+E", "i1", "x")];
        let p = BootstrapParams { resamples: 10, ..BootstrapParams::default() };
        assert!(compare_configs(&vs, "m", "1+A", "1+A+E", &p, Exec::Sequential).is_err());
        let ok = vec![v("1+A", "i1", "x"), v("1+A", "i2", "y"), v("1+A+E", "i1", "x"), v("1+A+E", "i2", "y")];
        let r = compare_configs(&ok, "m", "1+A", "1+A+E", &p, Exec::Sequential).unwrap();
        // model metrics are unavailable, so only native ones are tested
        let names: Vec<&str> = r.iter().map(|x| x.metric.as_str()).collect();
        assert_eq!(names, ["ROUGE-L", "WC"]);
        assert!(r.iter().all(|x| x.p_value == 1.0));
    }
}
