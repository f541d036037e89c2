//! In-process mock backends for tests and local demos.
//!
//! [`spawn_mock_backend`] serves the chat-completion shape with scripted
//! replies, latency injection and failure modes, and records every request
//! (raw body bytes included). `GET /__calls` returns the call log as JSON.
//! Companion mocks serve the remote scorer (`POST /score`) and embedding
//! (`POST /embed`) protocols.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use medroute_core::metrics::DeterministicEmbedder;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

use crate::model_client::{CompletionRequest, Role};

#[derive(Debug, Error)]
pub enum MockError {
    #[error("mock backend failed to start: {0}")]
    Startup(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Matcher {
    Any,
    LastUserContains(String),
    SystemContains(String),
}

impl Matcher {
    fn matches(&self, request: &CompletionRequest) -> bool {
        match self {
            Matcher::Any => true,
            Matcher::LastUserContains(needle) => last_user(request).contains(needle.as_str()),
            Matcher::SystemContains(needle) => request
                .messages
                .iter()
                .any(|m| m.role == Role::System && m.content.contains(needle.as_str())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Text(String),
    /// Content of the last user message.
    EchoLastUser,
    /// Every message content joined by blank lines.
    EchoPrompt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailureMode {
    #[default]
    None,
    Http500,
    /// Accept the request and never answer.
    Hang,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockBehavior {
    pub replies: Vec<(Matcher, Reply)>,
    pub default_reply: Reply,
    pub injected_delay_ms: u64,
    pub failure_mode: FailureMode,
}

impl Default for MockBehavior {
    fn default() -> Self {
        MockBehavior::echo()
    }
}

impl MockBehavior {
    pub fn echo() -> Self {
        MockBehavior {
            replies: Vec::new(),
            default_reply: Reply::EchoLastUser,
            injected_delay_ms: 0,
            failure_mode: FailureMode::None,
        }
    }

    pub fn echo_prompt() -> Self {
        MockBehavior {
            default_reply: Reply::EchoPrompt,
            ..MockBehavior::echo()
        }
    }

    pub fn fixed(text: impl Into<String>) -> Self {
        MockBehavior {
            default_reply: Reply::Text(text.into()),
            ..MockBehavior::echo()
        }
    }

    pub fn failing(mode: FailureMode) -> Self {
        MockBehavior {
            failure_mode: mode,
            ..MockBehavior::echo()
        }
    }

    pub fn with_delay(mut self, delay_ms: u64) -> Self {
        self.injected_delay_ms = delay_ms;
        self
    }

    pub fn reply_when(mut self, matcher: Matcher, reply: Reply) -> Self {
        self.replies.push((matcher, reply));
        self
    }

    fn respond(&self, request: &CompletionRequest) -> String {
        let reply = self
            .replies
            .iter()
            .find(|(m, _)| m.matches(request))
            .map(|(_, r)| r)
            .unwrap_or(&self.default_reply);
        match reply {
            Reply::Text(text) => text.clone(),
            Reply::EchoLastUser => last_user(request).to_string(),
            Reply::EchoPrompt => request
                .messages
                .iter()
                .map(|m| m.content.as_str())
                .collect::<Vec<_>>()
                .join("\n\n"),
        }
    }
}

fn last_user(request: &CompletionRequest) -> &str {
    request
        .messages
        .iter()
        .rev()
        .find(|m| m.role == Role::User)
        .map(|m| m.content.as_str())
        .unwrap_or("")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedCall {
    /// Request body exactly as received.
    pub raw: String,
    /// Parsed body, `null` if it was not valid JSON.
    pub request: Value,
    /// `Authorization` header, if any.
    #[serde(default)]
    pub authorization: Option<String>,
}

impl RecordedCall {
    pub fn completion(&self) -> Option<CompletionRequest> {
        serde_json::from_value(self.request.clone()).ok()
    }
}

#[derive(Default)]
struct MockState {
    behavior: Mutex<MockBehavior>,
    calls: Mutex<Vec<RecordedCall>>,
}

type Shared = Arc<MockState>;

/// A running mock server; aborted on drop.
pub struct MockBackend {
    url: String,
    state: Shared,
    task: JoinHandle<()>,
}

impl MockBackend {
    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn calls(&self) -> Vec<RecordedCall> {
        self.state.calls.lock().expect("call log poisoned").clone()
    }

    pub fn call_count(&self) -> usize {
        self.state.calls.lock().expect("call log poisoned").len()
    }

    pub fn clear_calls(&self) {
        self.state.calls.lock().expect("call log poisoned").clear();
    }

    pub fn set_behavior(&self, behavior: MockBehavior) {
        *self.state.behavior.lock().expect("behavior poisoned") = behavior;
    }
}

impl Drop for MockBackend {
    fn drop(&mut self) {
        self.task.abort();
    }
}

async fn serve(router: Router) -> Result<(String, JoinHandle<()>), MockError> {
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, router).await;
    });
    Ok((format!("http://{addr}"), task))
}

fn record(calls: &Mutex<Vec<RecordedCall>>, headers: &axum::http::HeaderMap, body: &[u8]) {
    let raw = String::from_utf8_lossy(body).into_owned();
    let request = serde_json::from_slice(body).unwrap_or(Value::Null);
    let authorization = headers
        .get(axum::http::header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    calls.lock().expect("call log poisoned").push(RecordedCall {
        raw,
        request,
        authorization,
    });
}

async fn completions(
    State(state): State<Shared>,
    headers: axum::http::HeaderMap,
    body: axum::body::Bytes,
) -> Response {
    record(&state.calls, &headers, &body);
    let behavior = state.behavior.lock().expect("behavior poisoned").clone();
    if behavior.injected_delay_ms > 0 {
        tokio::time::sleep(Duration::from_millis(behavior.injected_delay_ms)).await;
    }
    match behavior.failure_mode {
        FailureMode::Http500 => {
            return (StatusCode::INTERNAL_SERVER_ERROR, "injected failure").into_response()
        }
        FailureMode::Hang => std::future::pending::<()>().await,
        FailureMode::None => {}
    }
    let request: CompletionRequest = match serde_json::from_slice(&body) {
        Ok(request) => request,
        Err(err) => return (StatusCode::BAD_REQUEST, err.to_string()).into_response(),
    };
    let content = behavior.respond(&request);
    Json(json!({
        "id": "mock-completion",
        "object": "chat.completion",
        "model": request.model_id,
        "choices": [{
            "index": 0,
            "message": {"role": "assistant", "content": content},
            "finish_reason": "stop"
        }]
    }))
    .into_response()
}

async fn call_log(State(state): State<Shared>) -> Json<Vec<RecordedCall>> {
    Json(state.calls.lock().expect("call log poisoned").clone())
}

/// Starts a chat-completion mock on an ephemeral local port.
pub async fn spawn_mock_backend(behavior: MockBehavior) -> Result<MockBackend, MockError> {
    let state: Shared = Arc::new(MockState {
        behavior: Mutex::new(behavior),
        calls: Mutex::default(),
    });
    let router = Router::new()
        .route("/v1/chat/completions", post(completions))
        .route("/__calls", get(call_log))
        .with_state(state.clone());
    let (url, task) = serve(router).await?;
    Ok(MockBackend { url, state, task })
}

/// What a mock scorer answers on `POST /score`.
#[derive(Debug, Clone, PartialEq)]
pub enum ScorerReply {
    Scores(HashMap<String, f64>),
    Status(u16),
    Raw(String),
}

#[derive(Default)]
struct AuxState {
    reply: Mutex<Option<ScorerReply>>,
    calls: Mutex<Vec<RecordedCall>>,
    embedder: Option<DeterministicEmbedder>,
    fail: bool,
}

/// A running scorer or embedding mock; aborted on drop.
pub struct AuxMock {
    url: String,
    state: Arc<AuxState>,
    task: JoinHandle<()>,
}

impl AuxMock {
    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn calls(&self) -> Vec<RecordedCall> {
        self.state.calls.lock().expect("call log poisoned").clone()
    }

    pub fn set_scorer_reply(&self, reply: ScorerReply) {
        *self.state.reply.lock().expect("reply poisoned") = Some(reply);
    }
}

impl Drop for AuxMock {
    fn drop(&mut self) {
        self.task.abort();
    }
}

async fn score_route(
    State(state): State<Arc<AuxState>>,
    headers: axum::http::HeaderMap,
    body: axum::body::Bytes,
) -> Response {
    record(&state.calls, &headers, &body);
    let reply = state.reply.lock().expect("reply poisoned").clone();
    match reply {
        Some(ScorerReply::Scores(scores)) => Json(json!({ "scores": scores })).into_response(),
        Some(ScorerReply::Status(code)) => StatusCode::from_u16(code)
            .unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
            .into_response(),
        Some(ScorerReply::Raw(text)) => text.into_response(),
        None => StatusCode::SERVICE_UNAVAILABLE.into_response(),
    }
}

#[derive(Deserialize)]
struct EmbedBody {
    texts: Vec<String>,
}

async fn embed_route(
    State(state): State<Arc<AuxState>>,
    headers: axum::http::HeaderMap,
    body: axum::body::Bytes,
) -> Response {
    record(&state.calls, &headers, &body);
    if state.fail {
        return StatusCode::INTERNAL_SERVER_ERROR.into_response();
    }
    let Ok(parsed) = serde_json::from_slice::<EmbedBody>(&body) else {
        return StatusCode::BAD_REQUEST.into_response();
    };
    let embedder = state.embedder.as_ref().expect("embedding mock has an embedder");
    let vectors: Vec<Vec<f64>> = parsed.texts.iter().map(|t| embedder.vector(t)).collect();
    Json(json!({ "vectors": vectors })).into_response()
}

/// Remote-scorer mock answering `POST /score` with `reply`.
pub async fn spawn_mock_scorer(reply: ScorerReply) -> Result<AuxMock, MockError> {
    let state = Arc::new(AuxState {
        reply: Mutex::new(Some(reply)),
        ..AuxState::default()
    });
    let router = Router::new()
        .route("/score", post(score_route))
        .with_state(state.clone());
    let (url, task) = serve(router).await?;
    Ok(AuxMock { url, state, task })
}

/// Embedding mock answering `POST /embed` with `embedder`'s vectors, or
/// HTTP 500 when `fail` is set.
pub async fn spawn_mock_embedder(
    embedder: DeterministicEmbedder,
    fail: bool,
) -> Result<AuxMock, MockError> {
    let state = Arc::new(AuxState {
        embedder: Some(embedder),
        fail,
        ..AuxState::default()
    });
    let router = Router::new()
        .route("/embed", post(embed_route))
        .with_state(state.clone());
    let (url, task) = serve(router).await?;
    Ok(AuxMock { url, state, task })
}
