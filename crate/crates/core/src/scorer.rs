//! Client for the model-scorer sidecar (learned metrics, NLI metrics and
//! sentence embeddings).

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::corpus::SimilarityProvider;
use crate::error::{Error, Result};
use crate::exec::bounded_map;
use crate::metrics::{MeasurementVector, MetricValue, ModelMetric};

pub const PROTOCOL_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub metric: String,
    pub model_id: String,
    #[serde(default)]
    pub normalization: Option<String>,
    #[serde(default)]
    pub variant: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub models: Vec<ModelInfo>,
    pub protocol_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub reference: String,
    pub candidate: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub protocol_version: String,
    pub metric: String,
    pub pairs: Vec<ScorePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<f64>,
    pub model_ids: BTreeMap<String, String>,
    pub protocol_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub protocol_version: String,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
    pub model_id: String,
    pub protocol_version: String,
}

#[derive(Debug, Clone)]
pub struct ScorerConfig {
    pub base_url: String,
    pub batch_size: usize,
    pub parallelism: usize,
    pub timeout: Duration,
    /// Consecutive failures that open the breaker.
    pub breaker_threshold: u32,
    pub breaker_cooldown: Duration,
}

impl ScorerConfig {
    pub fn new(base_url: &str) -> Self {
        ScorerConfig {
            base_url: base_url.trim_end_matches('/').to_string(),
            batch_size: 32,
            parallelism: 2,
            timeout: Duration::from_secs(300),
            breaker_threshold: 3,
            breaker_cooldown: Duration::from_secs(30),
        }
    }
}

#[derive(Debug)]
struct Breaker {
    threshold: u32,
    cooldown: Duration,
    state: Mutex<(u32, Option<Instant>)>,
}

impl Breaker {
    fn check(&self) -> Result<()> {
        let mut st = self.state.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(opened) = st.1 {
            if opened.elapsed() < self.cooldown {
                return Err(Error::ScorerUnavailable("circuit open after repeated failures".into()));
            }
            // half-open: let one call through
            st.1 = None;
            st.0 = self.threshold.saturating_sub(1);
        }
        Ok(())
    }

    fn record(&self, ok: bool) {
        let mut st = self.state.lock().unwrap_or_else(|p| p.into_inner());
        if ok {
            *st = (0, None);
        } else {
            st.0 += 1;
            if st.0 >= self.threshold {
                st.1 = Some(Instant::now());
            }
        }
    }
}

/// Thread-safe sidecar client.
#[derive(Debug)]
pub struct ScorerClient {
    cfg: ScorerConfig,
    agent: ureq::Agent,
    breaker: Breaker,
}

impl ScorerClient {
    pub fn new(cfg: ScorerConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let breaker = Breaker {
            threshold: cfg.breaker_threshold.max(1),
            cooldown: cfg.breaker_cooldown,
            state: Mutex::new((0, None)),
        };
        ScorerClient {
            cfg,
            agent,
            breaker,
        }
    }

    pub fn config(&self) -> &ScorerConfig {
        &self.cfg
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.cfg.base_url)
    }

    fn check_version(found: &str) -> Result<()> {
        if found != PROTOCOL_VERSION {
            return Err(Error::ProtocolMismatch {
                expected: PROTOCOL_VERSION.into(),
                found: found.into(),
            });
        }
        Ok(())
    }

    fn call<T: DeserializeOwned>(&self, path: &str, body: Option<&impl Serialize>) -> Result<T> {
        self.breaker.check()?;
        let url = self.url(path);
        // only transport failures count against the breaker; any HTTP
        // answer means the sidecar is up
        let sent = match body {
            Some(b) => self.agent.post(&url).send_json(b),
            None => self.agent.get(&url).call(),
        }
        .and_then(|mut r| {
            let status = r.status().as_u16();
            r.body_mut().read_to_string().map(|t| (status, t))
        });
        self.breaker.record(sent.is_ok());
        let (status, text) = sent.map_err(|e| Error::ScorerUnavailable(format!("{url}: {e}")))?;
        Self::decode(&url, status, &text)
    }

    fn decode<T: DeserializeOwned>(url: &str, status: u16, text: &str) -> Result<T> {
        if status >= 500 {
            return Err(Error::ScorerUnavailable(format!("{url}: HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(Error::ScorerResponse(format!("{url}: HTTP {status}: {text}")));
        }
        // check the version before the full shape so a newer sidecar is
        // reported as a mismatch rather than a parse failure
        if let Ok(v) = serde_json::from_str::<serde_json::Value>(text) {
            if let Some(found) = v.get("protocol_version").and_then(|x| x.as_str()) {
                Self::check_version(found)?;
            }
        }
        serde_json::from_str(text).map_err(|e| Error::ScorerResponse(format!("{url}: {e}")))
    }

    pub fn health(&self) -> Result<HealthResponse> {
        let h: HealthResponse = self.call("/v1/health", None::<&()>)?;
        Self::check_version(&h.protocol_version)?;
        if h.status != "ok" {
            return Err(Error::ScorerUnavailable(format!("sidecar status {:?}", h.status)));
        }
        Ok(h)
    }

    /// Score (gold, output) pairs. The gold text is always the `reference`
    /// side, which makes it the premise for NLI metrics.
    pub fn score(&self, metric: ModelMetric, golds: &[&str], outputs: &[&str]) -> Result<ScoreResponse> {
        if golds.len() != outputs.len() {
            return Err(Error::InvalidInput("gold and output lists differ in length".into()));
        }
        let pairs: Vec<ScorePair> = golds
            .iter()
            .zip(outputs)
            .map(|(g, o)| ScorePair {
                reference: g.to_string(),
                candidate: o.to_string(),
            })
            .collect();
        self.score_pairs(metric, &pairs)
    }

    pub fn score_pairs(&self, metric: ModelMetric, pairs: &[ScorePair]) -> Result<ScoreResponse> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput("empty scoring batch".into()));
        }
        let chunks: Vec<&[ScorePair]> = pairs.chunks(self.cfg.batch_size.max(1)).collect();
        let replies = bounded_map(&chunks, self.cfg.parallelism, |chunk| {
            let req = ScoreRequest {
                protocol_version: PROTOCOL_VERSION.into(),
                metric: metric.wire_name().into(),
                pairs: chunk.to_vec(),
            };
            let resp: ScoreResponse = self.call("/v1/score", Some(&req))?;
            validate_scores(metric, &resp, chunk.len())?;
            Ok(resp)
        });
        let mut merged = ScoreResponse {
            scores: Vec::with_capacity(pairs.len()),
            model_ids: BTreeMap::new(),
            protocol_version: PROTOCOL_VERSION.into(),
            errors: None,
        };
        for r in replies {
            let r: ScoreResponse = r?;
            if !merged.model_ids.is_empty() && merged.model_ids != r.model_ids {
                return Err(Error::ScorerResponse("model ids changed between batches".into()));
            }
            merged.model_ids = r.model_ids;
            merged.scores.extend(r.scores);
        }
        Ok(merged)
    }

    /// Unit-normalized embeddings, one per text, all of the same dimension.
    pub fn embed(&self, texts: &[&str]) -> Result<(Vec<Vec<f64>>, String)> {
        if texts.is_empty() {
            return Err(Error::InvalidInput("empty embedding batch".into()));
        }
        let owned: Vec<String> = texts.iter().map(|t| t.to_string()).collect();
        let chunks: Vec<&[String]> = owned.chunks(self.cfg.batch_size.max(1)).collect();
        let replies = bounded_map(&chunks, self.cfg.parallelism, |chunk| {
            let req = EmbedRequest {
                protocol_version: PROTOCOL_VERSION.into(),
                texts: chunk.to_vec(),
            };
            let resp: EmbedResponse = self.call("/v1/embed", Some(&req))?;
            if resp.vectors.len() != chunk.len() {
                return Err(Error::ScorerResponse(format!(
                    "{} vectors for {} texts",
                    resp.vectors.len(),
                    chunk.len()
                )));
            }
            Ok(resp)
        });
        let mut vectors = Vec::with_capacity(texts.len());
        let mut model_id: Option<String> = None;
        for r in replies {
            let r = r?;
            match &model_id {
                Some(m) if *m != r.model_id => {
                    return Err(Error::ScorerResponse("embedding model changed between batches".into()))
                }
                _ => model_id = Some(r.model_id),
            }
            vectors.extend(r.vectors);
        }
        let dim = vectors[0].len();
        if dim == 0 {
            return Err(Error::ScorerResponse("zero-dimensional embedding".into()));
        }
        for v in &mut vectors {
            if v.len() != dim {
                return Err(Error::ScorerResponse(format!(
                    "embedding dimension {} differs from {dim}",
                    v.len()
                )));
            }
            normalize(v)?;
        }
        Ok((vectors, model_id.unwrap_or_default()))
    }
}

fn validate_scores(metric: ModelMetric, resp: &ScoreResponse, expected: usize) -> Result<()> {
    if resp.scores.len() != expected {
        return Err(Error::ScorerResponse(format!(
            "{metric}: {} scores for {expected} pairs",
            resp.scores.len()
        )));
    }
    if let Some(errs) = &resp.errors {
        if !errs.is_empty() {
            return Err(Error::ScorerResponse(format!("{metric}: {}", errs.join("; "))));
        }
    }
    for &s in &resp.scores {
        if !s.is_finite() {
            return Err(Error::ScorerResponse(format!("{metric}: non-finite score")));
        }
        if metric == ModelMetric::TrueNli && s != 0.0 && s != 1.0 {
            return Err(Error::ScorerResponse(format!("true_nli score {s} is not binary")));
        }
    }
    Ok(())
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::ScorerResponse("embedding has zero or non-finite norm".into()));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(())
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Cosine similarity over sidecar embeddings, for example selection.
pub struct EmbeddingSimilarity<'a> {
    client: &'a ScorerClient,
}

impl<'a> EmbeddingSimilarity<'a> {
    pub fn new(client: &'a ScorerClient) -> Self {
        EmbeddingSimilarity { client }
    }
}

impl SimilarityProvider for EmbeddingSimilarity<'_> {
    fn name(&self) -> &str {
        "sidecar-embedding"
    }

    fn scores(&self, query: &str, candidates: &[&str]) -> Result<Vec<f64>> {
        let mut texts = Vec::with_capacity(candidates.len() + 1);
        texts.push(query);
        texts.extend_from_slice(candidates);
        let (v, _) = self.client.embed(&texts)?;
        Ok(v[1..].iter().map(|c| cosine(&v[0], c)).collect())
    }
}

/// What the scorer delivered for one metric in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MetricAvailability {
    Available {
        model_ids: BTreeMap<String, String>,
        #[serde(default)]
        normalization: Option<String>,
        #[serde(default)]
        variant: Option<String>,
    },
    Unavailable { reason: String },
}

/// Fill the model-based fields of `vectors`. `golds[i]` and `outputs[i]`
/// belong to `vectors[i]`. A metric is either filled for every vector or
/// marked unavailable for every vector; only a protocol mismatch aborts.
pub fn score_vectors(
    client: &ScorerClient,
    metrics: &[ModelMetric],
    vectors: &mut [MeasurementVector],
    golds: &[&str],
    outputs: &[&str],
) -> Result<BTreeMap<ModelMetric, MetricAvailability>> {
    if vectors.len() != golds.len() || vectors.len() != outputs.len() {
        return Err(Error::InvalidInput("vectors, golds and outputs differ in length".into()));
    }
    let mut report = BTreeMap::new();
    let health = match client.health() {
        Ok(h) => Some(h),
        Err(e @ Error::ProtocolMismatch { .. }) => return Err(e),
        Err(e) => {
            tracing::warn!("scorer health probe failed: {e}");
            None
        }
    };
    for &m in metrics {
        let outcome = match &health {
            None => Err(Error::ScorerUnavailable("health probe failed".into())),
            Some(h) if !h.models.iter().any(|i| i.metric == m.wire_name()) => {
                Err(Error::ScorerUnavailable(format!("sidecar does not serve {m}")))
            }
            Some(_) if vectors.is_empty() => Ok(ScoreResponse {
                scores: Vec::new(),
                model_ids: BTreeMap::new(),
                protocol_version: PROTOCOL_VERSION.into(),
                errors: None,
            }),
            Some(_) => client.score(m, golds, outputs),
        };
        match outcome {
            Ok(resp) => {
                for (v, s) in vectors.iter_mut().zip(&resp.scores) {
                    v.set_model(m, MetricValue::Value(*s));
                }
                let info = health
                    .as_ref()
                    .and_then(|h| h.models.iter().find(|i| i.metric == m.wire_name()));
                report.insert(
                    m,
                    MetricAvailability::Available {
                        model_ids: resp.model_ids,
                        normalization: info.and_then(|i| i.normalization.clone()),
                        variant: info.and_then(|i| i.variant.clone()),
                    },
                );
            }
            Err(e @ Error::ProtocolMismatch { .. }) => return Err(e),
            Err(e) => {
                tracing::warn!("{m} unavailable: {e}");
                for v in vectors.iter_mut() {
                    v.set_model(m, MetricValue::Unavailable);
                }
                report.insert(m, MetricAvailability::Unavailable { reason: e.to_string() });
            }
        }
    }
    Ok(report)
}
