use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::TARGET_MARK;

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatReply {
    pub content: String,
    pub raw: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransportError {
    /// Network failure, timeout or 5xx.
    Retryable(String),
    /// 429 from the backend.
    RateLimited(String),
    /// Any other non-success status; retrying will not help.
    Fatal(String),
    Malformed { reason: String, raw: String },
}

pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatReply, TransportError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub role: String,
    pub content: String,
}

/// Request body of the chat-completions dialect, in field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireBody {
    pub model: String,
    pub messages: Vec<WireMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl WireBody {
    pub fn from_request(req: &ChatRequest) -> Self {
        WireBody {
            model: req.model.clone(),
            messages: vec![
                WireMessage {
                    role: "system".into(),
                    content: req.system.clone(),
                },
                WireMessage {
                    role: "user".into(),
                    content: req.user.clone(),
                },
            ],
            temperature: req.temperature,
            max_tokens: req.max_tokens,
            seed: req.seed,
        }
    }
}

/// HTTP transport for OpenAI-compatible `/chat/completions` endpoints.
pub struct OpenAiChatTransport {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    log_dir: Option<PathBuf>,
    sent: AtomicU64,
}

impl OpenAiChatTransport {
    pub fn new(
        endpoint: String,
        api_key: Option<String>,
        timeout: Duration,
        log_dir: Option<PathBuf>,
    ) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        OpenAiChatTransport {
            endpoint,
            api_key,
            agent,
            log_dir,
            sent: AtomicU64::new(0),
        }
    }

    fn log_request(&self, body: &[u8]) {
        let Some(dir) = &self.log_dir else { return };
        let n = self.sent.fetch_add(1, Ordering::SeqCst);
        let name = format!("{}-{n:06}.json", crate::text::sha256_hex(body).get(..16).unwrap_or(""));
        if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join(name), body)) {
            tracing::warn!("request log write failed: {e}");
        }
    }
}

impl ChatTransport for OpenAiChatTransport {
    fn complete(&self, request: &ChatRequest) -> Result<ChatReply, TransportError> {
        let body = serde_json::to_vec(&WireBody::from_request(request))
            .map_err(|e| TransportError::Fatal(e.to_string()))?;
        self.log_request(&body);

        let mut req = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = match req.send(&body[..]) {
            Ok(r) => r,
            Err(e) => return Err(TransportError::Retryable(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Retryable(e.to_string()))?;
        match status {
            200..=299 => {}
            429 => return Err(TransportError::RateLimited(format!("HTTP 429: {text}"))),
            500..=599 => return Err(TransportError::Retryable(format!("HTTP {status}: {text}"))),
            _ => return Err(TransportError::Fatal(format!("HTTP {status}: {text}"))),
        }
        let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| TransportError::Malformed {
            reason: format!("body is not JSON: {e}"),
            raw: text.clone(),
        })?;
        let content = raw
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .ok_or_else(|| TransportError::Malformed {
                reason: "missing choices[0].message.content".into(),
                raw: text.clone(),
            })?
            .to_string();
        Ok(ChatReply { content, raw })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StubMode {
    /// Reply with the user message.
    Echo,
    /// Reply with a fixed text.
    Canned { text: String },
    /// Reply with the target mark followed by the first words of the prompt.
    Extractive { max_words: usize },
    /// Like `Extractive`, but the span, its length and a share of swapped-in
    /// words are drawn from a generator seeded by the prompt, so outputs vary
    /// across prompts and repeat exactly for the same prompt.
    Sampled { max_words: usize },
}

/// Offline transport used for dry runs and tests.
#[derive(Debug, Clone)]
pub struct StubTransport {
    mode: StubMode,
}

impl StubTransport {
    pub fn new(mode: StubMode) -> Self {
        StubTransport { mode }
    }
}

impl ChatTransport for StubTransport {
    fn complete(&self, request: &ChatRequest) -> Result<ChatReply, TransportError> {
        let content = match &self.mode {
            StubMode::Echo => request.user.clone(),
            StubMode::Canned { text } => text.clone(),
            StubMode::Extractive { max_words } => {
                let words: Vec<&str> = request
                    .user
                    .split_whitespace()
                    .filter(|w| !w.ends_with(':'))
                    .take(*max_words)
                    .collect();
                format!("{TARGET_MARK} {}", words.join(" "))
            }
            StubMode::Sampled { max_words } => sampled(request, *max_words),
        };
        Ok(ChatReply {
            content,
            raw: serde_json::json!({ "stub": self.mode }),
        })
    }
}

fn sampled(request: &ChatRequest, max_words: usize) -> String {
    use rand::{Rng, SeedableRng};

    let digest = crate::text::sha256_hex(format!("{}\n{}", request.system, request.user).as_bytes());
    let seed = u64::from_str_radix(&digest[..16], 16).unwrap_or(0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<&str> = request.user.split_whitespace().filter(|w| !w.ends_with(':')).collect();
    if words.is_empty() || max_words == 0 {
        return TARGET_MARK.to_string();
    }
    let len = rng.random_range(max_words.div_ceil(2)..=max_words).min(words.len());
    let start = rng.random_range(0..=words.len() - len);
    let out: Vec<String> = words[start..start + len]
        .iter()
        .map(|w| {
            if rng.random_bool(0.2) {
                format!("stub{}", rng.random_range(0..1000))
            } else {
                w.to_string()
            }
        })
        .collect();
    format!("{TARGET_MARK} {}", out.join(" "))
}
