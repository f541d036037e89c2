//! Chat-completion wire client shared by specialists, orchestrator and
//! reformulator.
//!
//! Requests use the common `/v1/chat/completions` JSON shape and only whole
//! messages are consumed. Connect errors and 5xx responses are retried with
//! exponential backoff and full jitter; 4xx responses are not. `timeout_ms`
//! is a deadline for the whole call, retries included.

use std::time::{Duration, Instant};

use rand::Rng;
use reqwest::header::{AUTHORIZATION, CONTENT_TYPE};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BACKOFF_BASE_MS: u64 = 250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Field order is the wire order: `model`, `messages`, `max_tokens`,
/// `temperature`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    #[serde(rename = "model")]
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl CompletionRequest {
    pub fn new(
        model_id: impl Into<String>,
        messages: Vec<ChatMessage>,
        max_tokens: u32,
        temperature: f64,
    ) -> Result<Self, ClientError> {
        let request = CompletionRequest {
            model_id: model_id.into(),
            messages,
            max_tokens,
            temperature,
        };
        request.validate()?;
        Ok(request)
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        let first = self
            .messages
            .first()
            .ok_or_else(|| ClientError::InvalidRequest("no messages".into()))?;
        if first.role == Role::Assistant {
            return Err(ClientError::InvalidRequest(
                "first message must be system or user".into(),
            ));
        }
        if let Some(m) = self
            .messages
            .iter()
            .find(|m| m.role != Role::Assistant && m.content.is_empty())
        {
            return Err(ClientError::InvalidRequest(format!(
                "empty {:?} message",
                m.role
            )));
        }
        if self.max_tokens == 0 {
            return Err(ClientError::InvalidRequest("max_tokens must be positive".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ClientError::InvalidRequest("temperature must be >= 0".into()));
        }
        Ok(())
    }

    /// The exact request body bytes.
    pub fn to_wire(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("completion request serializes")
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("backend timed out after {elapsed_ms} ms")]
    Timeout { elapsed_ms: u64 },

    #[error("backend error after {attempts} attempt(s): {message}")]
    Backend { attempts: u32, message: String },

    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

enum Attempt {
    Done(String),
    Transient(String),
    Fatal(ClientError),
}

#[derive(Debug, Clone)]
pub struct ModelClient {
    http: reqwest::Client,
    backoff_base: Duration,
}

impl Default for ModelClient {
    fn default() -> Self {
        Self::new()
    }
}

impl ModelClient {
    pub fn new() -> Self {
        ModelClient {
            http: reqwest::Client::new(),
            backoff_base: Duration::from_millis(DEFAULT_BACKOFF_BASE_MS),
        }
    }

    pub fn with_backoff_base(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    pub fn completions_url(endpoint: &str) -> String {
        format!("{}/v1/chat/completions", endpoint.trim_end_matches('/'))
    }

    pub async fn complete(
        &self,
        endpoint: &str,
        request: &CompletionRequest,
        timeout_ms: u64,
        retries: u32,
    ) -> Result<String, ClientError> {
        self.complete_authorized(endpoint, None, request, timeout_ms, retries)
            .await
    }

    /// Like [`complete`](Self::complete), sending `bearer_token` as an
    /// `Authorization: Bearer` header when present.
    pub async fn complete_authorized(
        &self,
        endpoint: &str,
        bearer_token: Option<&str>,
        request: &CompletionRequest,
        timeout_ms: u64,
        retries: u32,
    ) -> Result<String, ClientError> {
        request.validate()?;
        let url = Self::completions_url(endpoint);
        let body = request.to_wire();
        let started = Instant::now();
        let deadline = started + Duration::from_millis(timeout_ms);
        let mut attempts = 0u32;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return Err(ClientError::Timeout {
                    elapsed_ms: started.elapsed().as_millis() as u64,
                });
            }
            attempts += 1;
            let attempt = self.attempt(&url, bearer_token, body.clone());
            let message = match tokio::time::timeout(remaining, attempt).await {
                Err(_) => {
                    return Err(ClientError::Timeout {
                        elapsed_ms: started.elapsed().as_millis() as u64,
                    })
                }
                Ok(Attempt::Done(text)) => return Ok(text),
                Ok(Attempt::Fatal(err)) => return Err(err),
                Ok(Attempt::Transient(message)) => message,
            };
            if attempts > retries {
                return Err(ClientError::Backend { attempts, message });
            }
            let delay = self.backoff(attempts - 1);
            if Instant::now() + delay >= deadline {
                return Err(ClientError::Backend { attempts, message });
            }
            tracing::debug!(%url, attempts, ?delay, "retrying after transient backend failure");
            tokio::time::sleep(delay).await;
        }
    }

    fn backoff(&self, retry_index: u32) -> Duration {
        let cap = self.backoff_base.as_millis() as u64 * (1u64 << retry_index.min(16));
        Duration::from_millis(rand::rng().random_range(0..=cap))
    }

    async fn attempt(&self, url: &str, bearer_token: Option<&str>, body: Vec<u8>) -> Attempt {
        let mut builder = self
            .http
            .post(url)
            .header(CONTENT_TYPE, "application/json")
            .body(body);
        if let Some(token) = bearer_token.filter(|t| !t.is_empty()) {
            builder = builder.header(AUTHORIZATION, format!("Bearer {token}"));
        }
        let response = match builder.send().await {
            Ok(response) => response,
            Err(err) if err.is_connect() || err.is_request() => {
                return Attempt::Transient(format!("connect: {err}"))
            }
            Err(err) => return Attempt::Transient(err.to_string()),
        };
        let status = response.status();
        let text = match response.text().await {
            Ok(text) => text,
            Err(err) => return Attempt::Transient(format!("reading body: {err}")),
        };
        if status.is_server_error() {
            return Attempt::Transient(format!("HTTP {status}"));
        }
        if !status.is_success() {
            return Attempt::Fatal(ClientError::Backend {
                attempts: 1,
                message: format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()),
            });
        }
        match serde_json::from_str::<CompletionResponse>(&text) {
            Ok(parsed) => match parsed.choices.into_iter().next() {
                Some(Choice {
                    message: ResponseMessage { content: Some(content) },
                }) => Attempt::Done(content),
                _ => Attempt::Fatal(ClientError::Protocol(
                    "response has no choices[0].message.content".into(),
                )),
            },
            Err(err) => Attempt::Fatal(ClientError::Protocol(format!("malformed body: {err}"))),
        }
    }
}
