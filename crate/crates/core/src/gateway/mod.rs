//! Chat-completion dispatch with retries, rate limiting and a
//! content-addressed generation cache.

mod batch;
mod cache;
mod limiter;
mod transport;

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use batch::{run_batch, CellOutcome, CellStatus, RunManifest, MANIFEST_SCHEMA_VERSION};
pub use cache::{CacheStatus, GenerationCache};
pub use limiter::TokenBucket;
pub use transport::{
    ChatReply, ChatRequest, ChatTransport, OpenAiChatTransport, StubMode, StubTransport,
    TransportError, WireBody, WireMessage,
};

use crate::error::{Error, Result};
use crate::promptgen::RenderedPrompt;
use crate::text::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireDialect {
    OpenaiChatV1,
    LocalStub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub backend_id: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub auth_env: Option<String>,
    pub wire_dialect: WireDialect,
    #[serde(default)]
    pub stub: Option<StubMode>,
    /// Requests per second; unlimited when absent.
    #[serde(default)]
    pub rate_limit: Option<f64>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Directory receiving the exact request bytes, when set.
    #[serde(default)]
    pub request_log_dir: Option<std::path::PathBuf>,
}

fn default_timeout_secs() -> u64 {
    120
}

impl BackendSpec {
    pub fn stub(backend_id: &str, mode: StubMode) -> Self {
        BackendSpec {
            backend_id: backend_id.to_string(),
            endpoint: None,
            model_name: format!("stub-{backend_id}"),
            auth_env: None,
            wire_dialect: WireDialect::LocalStub,
            stub: Some(mode),
            rate_limit: None,
            timeout_secs: default_timeout_secs(),
            request_log_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodingStrategy {
    Greedy,
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingParams {
    pub strategy: DecodingStrategy,
    pub max_new_tokens: u32,
    pub temperature: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            strategy: DecodingStrategy::Greedy,
            max_new_tokens: 1024,
            temperature: 0.0,
            seed: None,
        }
    }
}

impl DecodingParams {
    /// Greedy decoding ignores temperature, recorded as 0.
    pub fn normalized(&self) -> Result<DecodingParams> {
        if self.max_new_tokens == 0 {
            return Err(Error::Configuration("max_new_tokens must be positive".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(Error::Configuration("temperature must be finite and >= 0".into()));
        }
        let mut p = self.clone();
        if p.strategy == DecodingStrategy::Greedy {
            p.temperature = 0.0;
        }
        Ok(p)
    }
}

/// What gets sent for one cell: the two message texts plus the labels that
/// identify the cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatPrompt {
    pub system: String,
    pub user: String,
    /// Configuration string, or a task label such as `intent:free_form`.
    pub label: String,
    pub instance_id: String,
}

impl From<&RenderedPrompt> for ChatPrompt {
    fn from(p: &RenderedPrompt) -> Self {
        ChatPrompt {
            system: p.system_text.clone(),
            user: p.user_text.clone(),
            label: p.config.to_string(),
            instance_id: p.instance_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub key: String,
    pub backend_id: String,
    pub model_name: String,
    pub params: DecodingParams,
    pub label: String,
    pub instance_id: String,
    pub system: String,
    pub user: String,
    pub output_text: String,
    pub latency_ms: u64,
    pub created_at: String,
    pub raw_response: serde_json::Value,
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    backend_id: &'a str,
    model_name: &'a str,
    params: &'a DecodingParams,
    label: &'a str,
    instance_id: &'a str,
    system: &'a str,
    user: &'a str,
}

pub fn generation_key(spec: &BackendSpec, params: &DecodingParams, prompt: &ChatPrompt) -> String {
    let material = KeyMaterial {
        backend_id: &spec.backend_id,
        model_name: &spec.model_name,
        params,
        label: &prompt.label,
        instance_id: &prompt.instance_id,
        system: &prompt.system,
        user: &prompt.user,
    };
    sha256_hex(&serde_json::to_vec(&material).expect("key material serializes"))
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 4,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    pub fn no_wait(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// A configured backend: its spec, a transport, and a rate limiter.
#[derive(Clone)]
pub struct Backend {
    pub spec: BackendSpec,
    transport: Arc<dyn ChatTransport>,
    limiter: Option<Arc<TokenBucket>>,
}

impl std::fmt::Debug for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backend").field("spec", &self.spec).finish_non_exhaustive()
    }
}

impl Backend {
    pub fn from_spec(spec: BackendSpec) -> Result<Backend> {
        let transport: Arc<dyn ChatTransport> = match spec.wire_dialect {
            WireDialect::LocalStub => Arc::new(StubTransport::new(
                spec.stub.clone().unwrap_or(StubMode::Echo),
            )),
            WireDialect::OpenaiChatV1 => {
                let endpoint = spec.endpoint.clone().ok_or_else(|| {
                    Error::Configuration(format!("backend {} needs an endpoint", spec.backend_id))
                })?;
                let api_key = match &spec.auth_env {
                    Some(var) => Some(std::env::var(var).map_err(|_| {
                        Error::Configuration(format!(
                            "backend {} expects its key in ${var}",
                            spec.backend_id
                        ))
                    })?),
                    None => None,
                };
                Arc::new(OpenAiChatTransport::new(
                    endpoint,
                    api_key,
                    Duration::from_secs(spec.timeout_secs),
                    spec.request_log_dir.clone(),
                ))
            }
        };
        Ok(Backend::with_transport(spec, transport))
    }

    pub fn with_transport(spec: BackendSpec, transport: Arc<dyn ChatTransport>) -> Backend {
        let limiter = spec
            .rate_limit
            .filter(|r| *r > 0.0)
            .map(|r| Arc::new(TokenBucket::new(r, r.max(1.0))));
        Backend {
            spec,
            transport,
            limiter,
        }
    }

    pub fn id(&self) -> &str {
        &self.spec.backend_id
    }
}

/// Cache-first generation front end.
#[derive(Debug)]
pub struct Gateway {
    cache: GenerationCache,
    retry: RetryPolicy,
}

impl Gateway {
    pub fn new(cache: GenerationCache, retry: RetryPolicy) -> Self {
        Gateway { cache, retry }
    }

    pub fn cache(&self) -> &GenerationCache {
        &self.cache
    }

    pub fn key(&self, prompt: &ChatPrompt, backend: &Backend, params: &DecodingParams) -> Result<String> {
        Ok(generation_key(&backend.spec, &params.normalized()?, prompt))
    }

    /// Serve from cache, or issue one chat request and store the record.
    pub fn generate(
        &self,
        prompt: &ChatPrompt,
        backend: &Backend,
        params: &DecodingParams,
    ) -> Result<(GenerationRecord, CacheStatus)> {
        let params = params.normalized()?;
        let key = generation_key(&backend.spec, &params, prompt);
        if let Some(rec) = self.cache.get(&key)? {
            return Ok((rec, CacheStatus::Hit));
        }

        let request = ChatRequest {
            model: backend.spec.model_name.clone(),
            system: prompt.system.clone(),
            user: prompt.user.clone(),
            temperature: params.temperature,
            max_tokens: params.max_new_tokens,
            seed: params.seed,
        };
        let started = Instant::now();
        let reply = self.call_with_retry(backend, &request)?;
        let record = GenerationRecord {
            key,
            backend_id: backend.spec.backend_id.clone(),
            model_name: backend.spec.model_name.clone(),
            params,
            label: prompt.label.clone(),
            instance_id: prompt.instance_id.clone(),
            system: prompt.system.clone(),
            user: prompt.user.clone(),
            output_text: reply.content,
            latency_ms: started.elapsed().as_millis() as u64,
            created_at: chrono::Utc::now().to_rfc3339(),
            raw_response: reply.raw,
        };
        let stored = self.cache.put(record)?;
        Ok((stored, CacheStatus::Miss))
    }

    fn call_with_retry(&self, backend: &Backend, request: &ChatRequest) -> Result<ChatReply> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            if let Some(l) = &backend.limiter {
                l.acquire();
            }
            let err = match backend.transport.complete(request) {
                Ok(reply) => return Ok(reply),
                Err(e) => e,
            };
            match err {
                TransportError::Malformed { reason, raw } => {
                    return Err(Error::MalformedResponse {
                        backend_id: backend.spec.backend_id.clone(),
                        reason,
                        raw,
                    })
                }
                TransportError::Fatal(message) => {
                    return Err(Error::Backend {
                        backend_id: backend.spec.backend_id.clone(),
                        attempts: attempt,
                        message,
                    })
                }
                TransportError::Retryable(message) | TransportError::RateLimited(message) => {
                    if attempt >= self.retry.max_attempts {
                        return Err(Error::Backend {
                            backend_id: backend.spec.backend_id.clone(),
                            attempts: attempt,
                            message,
                        });
                    }
                    tracing::debug!(attempt, "retrying {}: {message}", backend.spec.backend_id);
                    std::thread::sleep(self.retry.delay(attempt));
                }
            }
        }
    }
}
