//! Lexical stand-in for the model-scorer sidecar. Scores are cheap token
//! statistics, which is enough to exercise the protocol end to end.

use std::collections::HashSet;
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use crate::words;

const NEGATIONS: &[&str] = &["not", "no", "never", "cannot", "fails", "without"];
pub const EMBED_DIM: usize = 64;

#[derive(Debug, Clone)]
pub struct SidecarOptions {
    pub protocol_version: String,
    /// Metrics listed by the health endpoint.
    pub metrics: Vec<String>,
    /// Metrics whose score calls answer 503.
    pub failing: Vec<String>,
}

impl Default for SidecarOptions {
    fn default() -> Self {
        SidecarOptions {
            protocol_version: "1".into(),
            metrics: ["bertscore", "scibertscore", "bleurt", "true_nli", "summac", "embed"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            failing: Vec::new(),
        }
    }
}

pub struct MockSidecar {
    pub url: String,
    /// `(path, request body)` in arrival order.
    pub requests: Arc<Mutex<Vec<(String, Value)>>>,
}

impl MockSidecar {
    pub fn spawn(options: SidecarOptions) -> MockSidecar {
        let state = Arc::new(SidecarState {
            options,
            requests: Arc::new(Mutex::new(Vec::new())),
        });
        let requests = state.requests.clone();
        let app = Router::new()
            .route("/v1/health", get(health))
            .route("/v1/score", post(score))
            .route("/v1/embed", post(embed))
            .with_state(state);
        let addr = crate::serve(app);
        MockSidecar {
            url: format!("http://{addr}"),
            requests,
        }
    }

    pub fn score_requests(&self) -> Vec<Value> {
        self.requests
            .lock()
            .unwrap()
            .iter()
            .filter(|(p, _)| p == "/v1/score")
            .map(|(_, v)| v.clone())
            .collect()
    }
}

struct SidecarState {
    options: SidecarOptions,
    requests: Arc<Mutex<Vec<(String, Value)>>>,
}

async fn health(State(s): State<Arc<SidecarState>>) -> Json<Value> {
    let models: Vec<Value> = s
        .options
        .metrics
        .iter()
        .map(|m| {
            json!({
                "metric": m,
                "model_id": format!("mock-{m}"),
                "normalization": "raw",
                "variant": if m == "summac" { Some("zs") } else { None },
            })
        })
        .collect();
    Json(json!({"status": "ok", "models": models, "protocol_version": s.options.protocol_version}))
}

async fn score(State(s): State<Arc<SidecarState>>, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    s.requests.lock().unwrap().push(("/v1/score".into(), body.clone()));
    let metric = body["metric"].as_str().unwrap_or("").to_string();
    if s.options.failing.contains(&metric) || !s.options.metrics.contains(&metric) {
        return (StatusCode::SERVICE_UNAVAILABLE, Json(json!({"error": "unavailable"})));
    }
    let pairs = body["pairs"].as_array().cloned().unwrap_or_default();
    let scores: Vec<f64> = pairs
        .iter()
        .map(|p| {
            let r = p["reference"].as_str().unwrap_or("");
            let c = p["candidate"].as_str().unwrap_or("");
            lexical_score(&metric, r, c)
        })
        .collect();
    (
        StatusCode::OK,
        Json(json!({
            "scores": scores,
            "model_ids": {metric.clone(): format!("mock-{metric}")},
            "protocol_version": s.options.protocol_version,
        })),
    )
}

async fn embed(State(s): State<Arc<SidecarState>>, Json(body): Json<Value>) -> Json<Value> {
    s.requests.lock().unwrap().push(("/v1/embed".into(), body.clone()));
    let vectors: Vec<Vec<f64>> = body["texts"]
        .as_array()
        .cloned()
        .unwrap_or_default()
        .iter()
        .map(|t| hashed_bag(t.as_str().unwrap_or("")))
        .collect();
    Json(json!({"vectors": vectors, "model_id": "mock-embed", "protocol_version": s.options.protocol_version}))
}

/// Deterministic score per metric. NLI metrics read `reference` as premise.
pub fn lexical_score(metric: &str, reference: &str, candidate: &str) -> f64 {
    let r: HashSet<String> = words(reference).into_iter().collect();
    let c: HashSet<String> = words(candidate).into_iter().collect();
    if r.is_empty() || c.is_empty() {
        return 0.0;
    }
    let inter = r.intersection(&c).count() as f64;
    match metric {
        "true_nli" => {
            let negated = c
                .iter()
                .any(|w| NEGATIONS.contains(&w.as_str()) && !r.contains(w));
            if !negated && c.is_subset(&r) {
                1.0
            } else {
                0.0
            }
        }
        "summac" => inter / c.len() as f64,
        "bleurt" => inter / r.union(&c).count() as f64,
        _ => 2.0 * inter / (r.len() + c.len()) as f64,
    }
}

/// Word-hashed bag of words, scaled so the client has to normalize.
pub fn hashed_bag(text: &str) -> Vec<f64> {
    let mut v = vec![0.0; EMBED_DIM];
    for w in words(text) {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in w.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        v[(h % EMBED_DIM as u64) as usize] += 3.0;
    }
    if v.iter().all(|x| *x == 0.0) {
        v[0] = 1.0;
    }
    v
}
