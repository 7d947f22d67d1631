//! Native measurements: surface statistics and ROUGE-L, plus the
//! per-instance measurement vector that model-based scores are added to.

mod rouge;
mod surface;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use rouge::{lcs_len, rouge_l, rouge_l_tokens, RougeL};
pub use surface::{citation_mark_usage, ngram_overlap, paragraph_count, SurfaceMetrics};

use crate::exec::Exec;

/// Aggregate column order.
pub const METRIC_COLUMNS: [&str; 12] = [
    "NG-1",
    "NG-2",
    "NG-3",
    "WC",
    "PC",
    "CM",
    "ROUGE-L",
    "BERTScore",
    "SciBERTScore",
    "BLEURT",
    "TRUE",
    "SummaC",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMetric {
    Bertscore,
    Scibertscore,
    Bleurt,
    TrueNli,
    Summac,
}

impl ModelMetric {
    pub const ALL: [ModelMetric; 5] = [
        ModelMetric::Bertscore,
        ModelMetric::Scibertscore,
        ModelMetric::Bleurt,
        ModelMetric::TrueNli,
        ModelMetric::Summac,
    ];

    pub fn wire_name(self) -> &'static str {
        match self {
            ModelMetric::Bertscore => "bertscore",
            ModelMetric::Scibertscore => "scibertscore",
            ModelMetric::Bleurt => "bleurt",
            ModelMetric::TrueNli => "true_nli",
            ModelMetric::Summac => "summac",
        }
    }

    pub fn column(self) -> &'static str {
        match self {
            ModelMetric::Bertscore => "BERTScore",
            ModelMetric::Scibertscore => "SciBERTScore",
            ModelMetric::Bleurt => "BLEURT",
            ModelMetric::TrueNli => "TRUE",
            ModelMetric::Summac => "SummaC",
        }
    }

    /// NLI metrics take (gold, output) as (premise, hypothesis).
    pub fn is_nli(self) -> bool {
        matches!(self, ModelMetric::TrueNli | ModelMetric::Summac)
    }
}

impl fmt::Display for ModelMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.wire_name())
    }
}

impl std::str::FromStr for ModelMetric {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        ModelMetric::ALL
            .into_iter()
            .find(|m| m.wire_name() == s || m.column() == s)
            .ok_or_else(|| crate::Error::InvalidInput(format!("unknown model metric {s:?}")))
    }
}

/// A model-based score, or the explicit marker for a metric the scorer could
/// not provide. Serialized as a number or the string `"unavailable"`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MetricValue {
    Value(f64),
    #[default]
    Unavailable,
}

impl MetricValue {
    pub fn value(self) -> Option<f64> {
        match self {
            MetricValue::Value(v) => Some(v),
            MetricValue::Unavailable => None,
        }
    }
}

impl Serialize for MetricValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MetricValue::Value(v) => s.serialize_f64(*v),
            MetricValue::Unavailable => s.serialize_str("unavailable"),
        }
    }
}

impl<'de> Deserialize<'de> for MetricValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(MetricValue::Value(v)),
            Raw::Str(s) if s == "unavailable" => Ok(MetricValue::Unavailable),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad metric value {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementVector {
    pub instance_id: String,
    pub config: String,
    pub backend_id: String,
    pub surface: SurfaceMetrics,
    pub rouge_l: f64,
    pub bertscore: MetricValue,
    pub scibertscore: MetricValue,
    pub bleurt: MetricValue,
    pub true_score: MetricValue,
    pub summac: MetricValue,
}

impl MeasurementVector {
    pub fn model(&self, m: ModelMetric) -> MetricValue {
        match m {
            ModelMetric::Bertscore => self.bertscore,
            ModelMetric::Scibertscore => self.scibertscore,
            ModelMetric::Bleurt => self.bleurt,
            ModelMetric::TrueNli => self.true_score,
            ModelMetric::Summac => self.summac,
        }
    }

    pub fn set_model(&mut self, m: ModelMetric, v: MetricValue) {
        let slot = match m {
            ModelMetric::Bertscore => &mut self.bertscore,
            ModelMetric::Scibertscore => &mut self.scibertscore,
            ModelMetric::Bleurt => &mut self.bleurt,
            ModelMetric::TrueNli => &mut self.true_score,
            ModelMetric::Summac => &mut self.summac,
        };
        *slot = v;
    }

    /// Raw per-instance value of an aggregate column; CM is 0 or 1.
    pub fn column(&self, name: &str) -> Option<f64> {
        let s = &self.surface;
        match name {
            "NG-1" => Some(s.ng1),
            "NG-2" => Some(s.ng2),
            "NG-3" => Some(s.ng3),
            "WC" => Some(s.word_count as f64),
            "PC" => Some(s.paragraph_count as f64),
            "CM" => Some(if s.citation_mark_used { 1.0 } else { 0.0 }),
            "ROUGE-L" => Some(self.rouge_l),
            other => other.parse::<ModelMetric>().ok().and_then(|m| self.model(m).value()),
        }
    }
}

/// One output to measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureInput {
    pub instance_id: String,
    pub config: String,
    pub backend_id: String,
    /// Prompt input the output was generated from (system and user text).
    pub source: String,
    pub output: String,
    pub reference: String,
}

pub fn measure(input: &MeasureInput) -> MeasurementVector {
    MeasurementVector {
        instance_id: input.instance_id.clone(),
        config: input.config.clone(),
        backend_id: input.backend_id.clone(),
        surface: SurfaceMetrics::compute(&input.source, &input.output),
        rouge_l: rouge_l(&input.output, &input.reference).f1,
        bertscore: MetricValue::Unavailable,
        scibertscore: MetricValue::Unavailable,
        bleurt: MetricValue::Unavailable,
        true_score: MetricValue::Unavailable,
        summac: MetricValue::Unavailable,
    }
}

pub fn measure_all(inputs: &[MeasureInput], exec: Exec) -> Vec<MeasurementVector> {
    exec.map(inputs, measure)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input() -> MeasureInput {
        MeasureInput {
            instance_id: "i".into(),
            config: "1+A".into(),
            backend_id: "b".into(),
            source: "Main paper abstract: parsing trees".into(),
            output: "[REF#1] studied parsing trees.".into(),
            reference: "[REF#1] parsed trees.".into(),
        }
    }

    #[test]
    fn unavailable_is_explicit() {
        let v = measure(&input());
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["bleurt"], "unavailable");
        assert_eq!(v.column("BLEURT"), None);
        let back: MeasurementVector = serde_json::from_value(json).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn columns_cover_table_order() {
        let mut v = measure(&input());
        v.set_model(ModelMetric::TrueNli, MetricValue::Value(1.0));
        assert_eq!(v.column("TRUE"), Some(1.0));
        assert_eq!(v.column("CM"), Some(1.0));
        assert_eq!(v.column("PC"), Some(1.0));
        for c in METRIC_COLUMNS {
            let known = v.column(c).is_some() || c.parse::<ModelMetric>().is_ok();
            assert!(known, "{c}");
        }
    }

    #[test]
    fn metric_value_rejects_other_strings() {
        assert!(serde_json::from_str::<MetricValue>("\"n/a\"").is_err());
        assert_eq!(serde_json::from_str::<MetricValue>("0.25").unwrap(), MetricValue::Value(0.25));
    }
}
