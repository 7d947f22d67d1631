use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::Router;
use serde_json::{json, Value};

/// `(request index, parsed body) -> (status, response body)`
pub type ChatHandler = Arc<dyn Fn(usize, &Value) -> (u16, String) + Send + Sync>;

#[derive(Debug, Clone)]
pub struct RecordedRequest {
    pub body: Vec<u8>,
    pub authorization: Option<String>,
}

pub struct MockChat {
    pub url: String,
    pub requests: Arc<Mutex<Vec<RecordedRequest>>>,
}

impl MockChat {
    pub fn spawn(handler: ChatHandler) -> MockChat {
        let state = Arc::new(ChatState {
            handler,
            count: AtomicUsize::new(0),
            requests: Arc::new(Mutex::new(Vec::new())),
        });
        let requests = state.requests.clone();
        let app = Router::new()
            .route("/v1/chat/completions", post(chat))
            .with_state(state);
        let addr = crate::serve(app);
        MockChat {
            url: format!("http://{addr}/v1/chat/completions"),
            requests,
        }
    }

    /// Replies with `reply(user message)` on every call.
    pub fn replying(reply: impl Fn(&str) -> String + Send + Sync + 'static) -> MockChat {
        MockChat::spawn(Arc::new(move |_, body| {
            let user = body
                .pointer("/messages/1/content")
                .and_then(Value::as_str)
                .unwrap_or("");
            (200, completion(&reply(user)))
        }))
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

pub fn completion(content: &str) -> String {
    json!({
        "id": "cmpl-test",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
    })
    .to_string()
}

struct ChatState {
    handler: ChatHandler,
    count: AtomicUsize,
    requests: Arc<Mutex<Vec<RecordedRequest>>>,
}

async fn chat(
    State(s): State<Arc<ChatState>>,
    headers: HeaderMap,
    body: Bytes,
) -> (StatusCode, String) {
    s.requests.lock().unwrap().push(RecordedRequest {
        body: body.to_vec(),
        authorization: headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .map(String::from),
    });
    let n = s.count.fetch_add(1, Ordering::SeqCst);
    let parsed: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    let (code, text) = (s.handler)(n, &parsed);
    (
        StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
        text,
    )
}
