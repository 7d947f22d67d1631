use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::metrics::MeasurementVector;
use crate::promptgen::BASELINE_LABEL;

pub const CORRELATION_COLUMNS: [&str; 7] = [
    "WC",
    "ROUGE-L",
    "BERTScore",
    "SciBERTScore",
    "BLEURT",
    "TRUE",
    "SummaC",
];

/// Pearson r; `None` when fewer than 3 points or either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Two-sided p-value of r under H0: rho = 0.
pub fn pearson_p_value(r: f64, n: usize) -> Option<f64> {
    if n < 3 {
        return None;
    }
    if r.abs() >= 1.0 {
        return Some(0.0);
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    /// Backend id, or `pooled`.
    pub scope: String,
    pub n: usize,
    pub columns: Vec<String>,
    pub r: Vec<Vec<Option<f64>>>,
    pub p: Vec<Vec<Option<f64>>>,
}

/// Instance-level correlations over every generated output in `vectors`
/// (baseline rows excluded). A column with missing values or no variance is
/// undefined throughout.
pub fn pearson_matrix(scope: &str, vectors: &[&MeasurementVector]) -> CorrelationMatrix {
    let rows: Vec<&&MeasurementVector> = vectors.iter().filter(|v| v.config != BASELINE_LABEL).collect();
    let series: Vec<Option<Vec<f64>>> = CORRELATION_COLUMNS
        .iter()
        .map(|c| rows.iter().map(|v| v.column(c)).collect::<Option<Vec<f64>>>())
        .collect();
    let k = CORRELATION_COLUMNS.len();
    let mut r = vec![vec![None; k]; k];
    let mut p = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = match (&series[i], &series[j]) {
                (Some(x), Some(y)) => pearson(x, y),
                _ => None,
            };
            // the diagonal is exactly 1 whenever the series is defined
            let v = if i == j { v.map(|_| 1.0) } else { v };
            let pv = v.and_then(|rv| pearson_p_value(rv, rows.len()));
            r[i][j] = v;
            r[j][i] = v;
            p[i][j] = pv;
            p[j][i] = pv;
        }
    }
    CorrelationMatrix {
        scope: scope.to_string(),
        n: rows.len(),
        columns: CORRELATION_COLUMNS.iter().map(|s| s.to_string()).collect(),
        r,
        p,
    }
}

/// One matrix per backend followed by the pooled matrix.
pub fn correlation_report(vectors: &[MeasurementVector]) -> Vec<CorrelationMatrix> {
    let backends: BTreeSet<&str> = vectors
        .iter()
        .filter(|v| v.config != BASELINE_LABEL)
        .map(|v| v.backend_id.as_str())
        .collect();
    let mut out: Vec<CorrelationMatrix> = backends
        .iter()
        .map(|b| {
            let vs: Vec<&MeasurementVector> = vectors.iter().filter(|v| v.backend_id == *b).collect();
            pearson_matrix(b, &vs)
        })
        .collect();
    let all: Vec<&MeasurementVector> = vectors.iter().collect();
    out.push(pearson_matrix("pooled", &all));
    out
}
