//! Multi-turn session state, follow-up reformulation and the session store.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use medroute_core::FinalAnswer;
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex as TurnLock;

use crate::model_client::{ChatMessage, CompletionRequest, ModelClient};
use crate::orchestrator::OrchestratorConfig;

pub const DEFAULT_HISTORY_WINDOW: usize = 6;

pub const DEFAULT_REFORMULATION_TEMPLATE: &str = "You rewrite follow-up questions from a \
medical chat. Given the conversation so far and the user's new question, rewrite the new \
question as a fully self-contained query that can be understood without the conversation. \
Keep the user's language and meaning; do not answer it. Reply with the rewritten question only.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub user_question: String,
    pub reformulated_question: String,
    pub answer: FinalAnswer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationState {
    pub session_id: String,
    pub turns: Vec<Turn>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl ConversationState {
    pub fn new(session_id: impl Into<String>) -> Self {
        let now = Utc::now();
        ConversationState {
            session_id: session_id.into(),
            turns: Vec::new(),
            created_at: now,
            updated_at: now,
        }
    }
}

/// Returns `state` with one more turn; earlier turns are untouched.
pub fn append_turn(
    mut state: ConversationState,
    question: &str,
    reformulated: &str,
    answer: FinalAnswer,
) -> ConversationState {
    state.turns.push(Turn {
        user_question: question.to_string(),
        reformulated_question: reformulated.to_string(),
        answer,
    });
    state.updated_at = Utc::now().max(state.created_at);
    state
}

/// Unset endpoint, model and token fall back to the orchestrator's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReformulatorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default = "default_window")]
    pub history_window: usize,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_template")]
    pub prompt_template: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_token: Option<String>,
}

fn default_window() -> usize {
    DEFAULT_HISTORY_WINDOW
}
fn default_timeout() -> u64 {
    20_000
}
fn default_retries() -> u32 {
    1
}
fn default_template() -> String {
    DEFAULT_REFORMULATION_TEMPLATE.to_string()
}

impl Default for ReformulatorConfig {
    fn default() -> Self {
        ReformulatorConfig {
            endpoint: None,
            model_id: None,
            history_window: DEFAULT_HISTORY_WINDOW,
            timeout_ms: default_timeout(),
            retries: default_retries(),
            prompt_template: default_template(),
            api_token: None,
        }
    }
}

impl ReformulatorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.history_window == 0 {
            return Err("reformulator history_window must be at least 1".into());
        }
        if self.timeout_ms == 0 {
            return Err("reformulator timeout_ms must be positive".into());
        }
        Ok(())
    }

    pub fn inherit_from(mut self, orchestrator: &OrchestratorConfig) -> Self {
        self.endpoint.get_or_insert_with(|| orchestrator.endpoint.clone());
        self.model_id.get_or_insert_with(|| orchestrator.model_id.clone());
        if self.api_token.is_none() {
            self.api_token = orchestrator.api_token.clone();
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reformulation {
    pub text: String,
    /// The rewrite was attempted and failed; `text` is the original question.
    pub degraded: bool,
}

/// The last `window` turns and the new question in one user message.
pub fn build_reformulation_prompt(
    template: &str,
    turns: &[Turn],
    question: &str,
    window: usize,
) -> Vec<ChatMessage> {
    let recent = &turns[turns.len().saturating_sub(window)..];
    let mut user = String::from("Conversation so far:\n");
    for turn in recent {
        user.push_str(&format!(
            "\nUser: {}\nAssistant: {}\n",
            turn.user_question, turn.answer.text
        ));
    }
    user.push_str(&format!("\nNew question: {question}"));
    vec![ChatMessage::system(template), ChatMessage::user(user)]
}

/// Rewrites a follow-up into a standalone question. The first turn is
/// returned as is without a backend call; failures fall back to the original.
pub async fn reformulate(
    client: &ModelClient,
    state: &ConversationState,
    question: &str,
    config: &ReformulatorConfig,
) -> Reformulation {
    let passthrough = |degraded| Reformulation {
        text: question.to_string(),
        degraded,
    };
    if state.turns.is_empty() {
        return passthrough(false);
    }
    let (Some(endpoint), Some(model_id)) = (config.endpoint.as_deref(), config.model_id.as_deref())
    else {
        tracing::warn!("reformulator has no endpoint; using the question unchanged");
        return passthrough(true);
    };
    let messages = build_reformulation_prompt(
        &config.prompt_template,
        &state.turns,
        question,
        config.history_window,
    );
    let outcome = match CompletionRequest::new(model_id, messages, 256, 0.0) {
        Ok(request) => {
            client
                .complete_authorized(
                    endpoint,
                    config.api_token.as_deref(),
                    &request,
                    config.timeout_ms,
                    config.retries,
                )
                .await
        }
        Err(err) => Err(err),
    };
    match outcome {
        Ok(text) if !text.trim().is_empty() => Reformulation {
            text: text.trim().to_string(),
            degraded: false,
        },
        Ok(_) => {
            tracing::warn!(session = %state.session_id, "reformulator returned nothing");
            passthrough(true)
        }
        Err(err) => {
            tracing::warn!(session = %state.session_id, error = %err, "reformulation degraded");
            passthrough(true)
        }
    }
}

pub type SessionHandle = Arc<TurnLock<ConversationState>>;

/// In-memory sessions with optional JSON snapshots under `state_dir`.
///
/// Each session sits behind its own async mutex; holding it for a whole turn
/// serializes turns of one session in arrival order while different sessions
/// run in parallel.
#[derive(Debug, Default)]
pub struct SessionStore {
    sessions: Mutex<HashMap<String, SessionHandle>>,
    state_dir: Option<PathBuf>,
}

/// Session ids accepted from clients: 1 to 128 of `[A-Za-z0-9_-]`.
pub fn is_safe_session_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl SessionStore {
    pub fn new(state_dir: Option<PathBuf>) -> Self {
        SessionStore {
            sessions: Mutex::default(),
            state_dir,
        }
    }

    fn snapshot_path(&self, id: &str) -> Option<PathBuf> {
        self.state_dir.as_ref().map(|dir| dir.join(format!("{id}.json")))
    }

    fn load_snapshot(&self, id: &str) -> Option<ConversationState> {
        let path = self.snapshot_path(id)?;
        let bytes = std::fs::read(&path).ok()?;
        match serde_json::from_slice::<ConversationState>(&bytes) {
            Ok(state) if state.session_id == id => Some(state),
            Ok(_) => None,
            Err(err) => {
                tracing::warn!(path = %path.display(), error = %err, "ignoring unreadable session snapshot");
                None
            }
        }
    }

    /// The existing session for a known id, otherwise a fresh session with a
    /// new unique id.
    pub fn get_or_create_session(&self, id: Option<&str>) -> SessionHandle {
        let mut sessions = self.sessions.lock().expect("session map poisoned");
        if let Some(id) = id.filter(|id| is_safe_session_id(id)) {
            if let Some(handle) = sessions.get(id) {
                return handle.clone();
            }
            if let Some(state) = self.load_snapshot(id) {
                let handle = Arc::new(TurnLock::new(state));
                sessions.insert(id.to_string(), handle.clone());
                return handle;
            }
        }
        let id = loop {
            let candidate = uuid::Uuid::new_v4().simple().to_string();
            if !sessions.contains_key(&candidate) {
                break candidate;
            }
        };
        let handle = Arc::new(TurnLock::new(ConversationState::new(id.clone())));
        sessions.insert(id, handle.clone());
        handle
    }

    /// A copy of a known session's state. Waits for an in-flight turn.
    pub async fn get(&self, id: &str) -> Option<ConversationState> {
        let handle = {
            let sessions = self.sessions.lock().expect("session map poisoned");
            sessions.get(id).cloned()
        };
        match handle {
            Some(handle) => Some(handle.lock().await.clone()),
            None if is_safe_session_id(id) => self.load_snapshot(id),
            None => None,
        }
    }

    pub fn persist(&self, state: &ConversationState) -> std::io::Result<()> {
        let Some(path) = self.snapshot_path(&state.session_id) else {
            return Ok(());
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        write_atomic(&path, &serde_json::to_vec_pretty(state)?)
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, path)
}
