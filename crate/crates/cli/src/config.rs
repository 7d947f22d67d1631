//! The TOML run configuration.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use citegen_core::analysis::BootstrapParams;
use citegen_core::gateway::{BackendSpec, DecodingParams, StubMode};
use citegen_core::metrics::ModelMetric;
use citegen_core::promptgen::{enumerate_run_matrix, ComponentSet, PromptConfig};
use citegen_core::provenance::{config_hash, Provenance};
use citegen_core::{Error, Result};

/// Backend id that is always available without configuration.
pub const BUILTIN_STUB: &str = "stub";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    /// Relative to the config file.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub corpus: CorpusSection,
    #[serde(default)]
    pub templates: TemplatesSection,
    #[serde(default)]
    pub matrix: MatrixSection,
    #[serde(default)]
    pub decoding: DecodingParams,
    #[serde(default)]
    pub backends: Vec<BackendSpec>,
    #[serde(default)]
    pub intents: IntentsSection,
    #[serde(default)]
    pub scorer: ScorerSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub humeval: HumevalSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub raw: PathBuf,
    #[serde(default)]
    pub section_titles: Option<PathBuf>,
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    #[serde(default = "default_paragraph_words")]
    pub min_paragraph_words: usize,
    #[serde(default = "default_sentence_words")]
    pub min_sentence_words: usize,
    #[serde(default = "yes")]
    pub language_filter: bool,
}

fn default_paragraph_words() -> usize {
    40
}
fn default_sentence_words() -> usize {
    10
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplatesSection {
    /// Directory of `template<N>.toml` files; the built-in set when absent.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSection {
    #[serde(default = "all_templates")]
    pub templates: Vec<u8>,
    #[serde(default = "study_sets")]
    pub component_sets: Vec<String>,
}

fn all_templates() -> Vec<u8> {
    (1..=6).collect()
}
fn study_sets() -> Vec<String> {
    ComponentSet::study_sets().iter().map(|s| s.to_string()).collect()
}

impl Default for MatrixSection {
    fn default() -> Self {
        MatrixSection {
            templates: all_templates(),
            component_sets: study_sets(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntentsSection {
    /// Backend generating free-form intents.
    #[serde(default = "stub_id")]
    pub backend: String,
    #[serde(default = "intent_tokens")]
    pub max_new_tokens: u32,
    /// URL of a categorical intent classifier; the corpus column when absent.
    #[serde(default)]
    pub classifier: Option<String>,
}

fn stub_id() -> String {
    BUILTIN_STUB.to_string()
}
fn intent_tokens() -> u32 {
    64
}

impl Default for IntentsSection {
    fn default() -> Self {
        IntentsSection {
            backend: stub_id(),
            max_new_tokens: intent_tokens(),
            classifier: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerSection {
    /// Sidecar base URL; model-based metrics are unavailable without it.
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default = "all_metrics")]
    pub metrics: Vec<String>,
    #[serde(default = "scorer_batch")]
    pub batch_size: usize,
    #[serde(default = "scorer_parallelism")]
    pub parallelism: usize,
    #[serde(default = "scorer_timeout")]
    pub timeout_secs: u64,
}

fn all_metrics() -> Vec<String> {
    ModelMetric::ALL.iter().map(|m| m.wire_name().to_string()).collect()
}
fn scorer_batch() -> usize {
    32
}
fn scorer_parallelism() -> usize {
    2
}
fn scorer_timeout() -> u64 {
    300
}

impl Default for ScorerSection {
    fn default() -> Self {
        ScorerSection {
            url: None,
            metrics: all_metrics(),
            batch_size: scorer_batch(),
            parallelism: scorer_parallelism(),
            timeout_secs: scorer_timeout(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "resamples")]
    pub resamples: usize,
    #[serde(default = "ratio")]
    pub ratio: f64,
    #[serde(default)]
    pub seed: u64,
    /// Config pairs (A, B) tested by `report`.
    #[serde(default = "comparisons")]
    pub comparisons: Vec<(String, String)>,
    #[serde(default)]
    pub length_bin: Option<LengthBinSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthBinSection {
    pub a: String,
    pub b: String,
    /// Token count, or "mean".
    #[serde(default = "mean_threshold")]
    pub threshold: String,
}

fn resamples() -> usize {
    10_000
}
fn ratio() -> f64 {
    0.5
}
fn comparisons() -> Vec<(String, String)> {
    vec![("6+A+IF+E".into(), "6+A".into())]
}
fn mean_threshold() -> String {
    "mean".into()
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            resamples: resamples(),
            ratio: ratio(),
            seed: 0,
            comparisons: comparisons(),
            length_bin: None,
        }
    }
}

impl AnalysisSection {
    pub fn bootstrap(&self) -> BootstrapParams {
        BootstrapParams {
            resamples: self.resamples,
            ratio: self.ratio,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Requests in flight per backend.
    #[serde(default = "run_parallelism")]
    pub parallelism: usize,
    /// Attempts per request, the first included.
    #[serde(default = "max_attempts")]
    pub max_attempts: u32,
    /// First retry delay; doubles per attempt up to 16x.
    #[serde(default = "retry_base_ms")]
    pub retry_base_ms: u64,
}

fn run_parallelism() -> usize {
    4
}
fn max_attempts() -> u32 {
    4
}
fn retry_base_ms() -> u64 {
    500
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            parallelism: run_parallelism(),
            max_attempts: max_attempts(),
            retry_base_ms: retry_base_ms(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumevalSection {
    #[serde(default = "sample")]
    pub sample: usize,
    #[serde(default)]
    pub seed: u64,
    /// Backend that extracts atomic facts.
    #[serde(default = "stub_id")]
    pub fact_backend: String,
    /// Configurations whose outputs are judged.
    #[serde(default = "humeval_configs")]
    pub configs: Vec<String>,
    /// Backends whose outputs are judged; every configured backend when empty.
    #[serde(default)]
    pub backends: Vec<String>,
}

fn sample() -> usize {
    30
}
fn humeval_configs() -> Vec<String> {
    vec!["6+A".into(), "6+A+IF+E".into()]
}

impl Default for HumevalSection {
    fn default() -> Self {
        HumevalSection {
            sample: sample(),
            seed: 0,
            fact_backend: stub_id(),
            configs: humeval_configs(),
            backends: Vec::new(),
        }
    }
}

/// A parsed, validated configuration with paths resolved against the
/// config file's directory.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub file: RunConfigFile,
    pub base: PathBuf,
    pub provenance: Provenance,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        LoadedConfig::from_str(&text, &base, &path.display().to_string())
    }

    pub fn from_str(text: &str, base: &Path, name: &str) -> Result<LoadedConfig> {
        let file: RunConfigFile = toml::from_str(text)
            .map_err(|e| Error::Configuration(format!("{name}: {}", e.to_string().trim())))?;
        file.validate()?;
        // the hash identifies the experiment, not where its outputs go
        let mut hashed = file.clone();
        hashed.output_dir = PathBuf::new();
        let provenance = Provenance::new(config_hash(
            &serde_json::to_vec(&hashed).expect("config serializes"),
        ));
        Ok(LoadedConfig {
            file,
            base: base.to_path_buf(),
            provenance,
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.file.output_dir)
    }

    pub fn matrix(&self) -> Result<Vec<PromptConfig>> {
        let sets = self
            .file
            .matrix
            .component_sets
            .iter()
            .map(|s| s.parse::<ComponentSet>())
            .collect::<Result<Vec<_>>>()?;
        enumerate_run_matrix(&self.file.matrix.templates, &sets)
    }

    /// Configured backend, or the built-in extractive stub.
    pub fn backend_spec(&self, id: &str) -> Result<BackendSpec> {
        if let Some(b) = self.file.backends.iter().find(|b| b.backend_id == id) {
            return Ok(b.clone());
        }
        if id == BUILTIN_STUB {
            return Ok(BackendSpec::stub(BUILTIN_STUB, StubMode::Sampled { max_words: 48 }));
        }
        Err(Error::Configuration(format!(
            "unknown backend {id:?}; configured: {}",
            self.backend_ids().join(", ")
        )))
    }

    pub fn backend_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.file.backends.iter().map(|b| b.backend_id.clone()).collect();
        if !ids.iter().any(|i| i == BUILTIN_STUB) {
            ids.push(BUILTIN_STUB.to_string());
        }
        ids
    }
}

fn field(name: &str, reason: impl std::fmt::Display) -> Error {
    Error::Configuration(format!("field `{name}`: {reason}"))
}

impl RunConfigFile {
    pub fn validate(&self) -> Result<()> {
        if self.corpus.min_paragraph_words == 0 {
            return Err(field("corpus.min_paragraph_words", "must be positive"));
        }
        for t in &self.matrix.templates {
            if !(1..=6).contains(t) {
                return Err(field("matrix.templates", format!("template {t} does not exist")));
            }
        }
        if self.matrix.templates.is_empty() || self.matrix.component_sets.is_empty() {
            return Err(field("matrix", "run matrix is empty"));
        }
        for s in &self.matrix.component_sets {
            s.parse::<ComponentSet>()
                .map_err(|e| field("matrix.component_sets", e))?;
        }
        self.decoding.normalized().map_err(|e| field("decoding", e))?;
        let mut seen = BTreeSet::new();
        for (i, b) in self.backends.iter().enumerate() {
            if b.backend_id.trim().is_empty() {
                return Err(field(&format!("backends[{i}].backend_id"), "is empty"));
            }
            if !seen.insert(b.backend_id.as_str()) {
                return Err(field(&format!("backends[{i}].backend_id"), format!("duplicate id {:?}", b.backend_id)));
            }
            if b.timeout_secs == 0 {
                return Err(field(&format!("backends[{i}].timeout_secs"), "must be positive"));
            }
        }
        for m in &self.scorer.metrics {
            m.parse::<ModelMetric>()
                .map_err(|_| field("scorer.metrics", format!("unknown metric {m:?}")))?;
        }
        if self.scorer.batch_size == 0 {
            return Err(field("scorer.batch_size", "must be positive"));
        }
        if self.analysis.resamples == 0 {
            return Err(field("analysis.resamples", "must be positive"));
        }
        if !(self.analysis.ratio > 0.0 && self.analysis.ratio <= 1.0) {
            return Err(field("analysis.ratio", "must be in (0, 1]"));
        }
        for (a, b) in &self.analysis.comparisons {
            for c in [a, b] {
                c.parse::<PromptConfig>()
                    .map_err(|e| field("analysis.comparisons", e))?;
            }
        }
        if let Some(lb) = &self.analysis.length_bin {
            for c in [&lb.a, &lb.b] {
                c.parse::<PromptConfig>().map_err(|e| field("analysis.length_bin", e))?;
            }
            if lb.threshold != "mean" && lb.threshold.parse::<f64>().is_err() {
                return Err(field("analysis.length_bin.threshold", "must be a number or \"mean\""));
            }
        }
        if self.run.max_attempts == 0 {
            return Err(field("run.max_attempts", "must be at least 1"));
        }
        if self.run.parallelism == 0 {
            return Err(field("run.parallelism", "must be positive"));
        }
        for c in &self.humeval.configs {
            c.parse::<PromptConfig>().map_err(|e| field("humeval.configs", e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<LoadedConfig> {
        LoadedConfig::from_str(text, Path::new("/tmp"), "test.toml")
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = load("[corpus]\nraw = \"corpus.jsonl\"\n").unwrap();
        assert_eq!(c.matrix().unwrap().len(), 36);
        assert_eq!(c.output_dir(), PathBuf::from("/tmp/out"));
        assert_eq!(c.file.analysis.bootstrap(), BootstrapParams::default());
        assert_eq!(c.backend_spec("stub").unwrap().backend_id, "stub");
        assert!(c.backend_spec("gpt").is_err());
    }

    #[test]
    fn field_level_errors() {
        let e = load("[corpus]\nraw = \"x\"\nbogus = 1\n").unwrap_err().to_string();
        assert!(e.contains("bogus"), "{e}");
        let e = load("[corpus]\nraw = \"x\"\n[analysis]\nratio = 1.5\n").unwrap_err().to_string();
        assert!(e.contains("analysis.ratio"), "{e}");
        let e = load("[corpus]\nraw = \"x\"\n[matrix]\ntemplates = [7]\n").unwrap_err().to_string();
        assert!(e.contains("matrix.templates"), "{e}");
        let e = load("[corpus]\n").unwrap_err().to_string();
        assert!(e.contains("raw"), "{e}");
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = load("output_dir = \"a\"\n[corpus]\nraw = \"x\"\n").unwrap();
        let b = load("output_dir = \"b\"\n[corpus]\nraw = \"x\"\n").unwrap();
        let c = load("[corpus]\nraw = \"y\"\n").unwrap();
        assert_eq!(a.provenance, b.provenance);
        assert_ne!(a.provenance, c.provenance);
    }
}
