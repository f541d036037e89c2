//! The per-turn pipeline: reformulate, route, dispatch, synthesize, record.

use std::time::Instant;

use medroute_core::label::{LabelScore, SpecialtyLabel};
use medroute_core::router::{apply_strategy, SelectionStrategy};
use medroute_core::{Error as CoreError, FinalAnswer, RoutingDecision, SpecialistResponse};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, GatewayConfig};
use crate::conversation::{append_turn, reformulate, ConversationState, ReformulatorConfig, SessionStore};
use crate::model_client::ModelClient;
use crate::orchestrator::{synthesize, OrchestratorConfig, SynthesisError};
use crate::scoring::Scorer;
use crate::specialists::{dispatch, DispatchError, SpecialistRegistry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_specialist: Option<String>,
}

impl ChatRequest {
    pub fn new(message: impl Into<String>) -> Self {
        ChatRequest {
            session_id: None,
            message: message.into(),
            target_specialist: None,
        }
    }

    pub fn in_session(mut self, session_id: impl Into<String>) -> Self {
        self.session_id = Some(session_id.into());
        self
    }

    pub fn targeting(mut self, label_id: impl Into<String>) -> Self {
        self.target_specialist = Some(label_id.into());
        self
    }
}

/// Milliseconds spent in each stage of a turn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timings {
    pub reformulate_ms: u64,
    pub routing_ms: u64,
    pub dispatch_ms: u64,
    pub synthesis_ms: u64,
    pub total_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTurnResponse {
    pub session_id: String,
    #[serde(rename = "final")]
    pub final_answer: FinalAnswer,
    /// All ten labels, selected or not.
    pub router_scores: Vec<LabelScore>,
    pub reformulated_question: String,
    pub degraded: bool,
    pub timings: Timings,
}

/// What a failed turn still knows, for partial responses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PartialTurn {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reformulated_question: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub router_scores: Vec<LabelScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decision: Option<RoutingDecision>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub contributions: Vec<SpecialistResponse>,
    pub timings: Timings,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TurnError {
    #[error("bad request: {0}")]
    BadRequest(String),

    #[error("router unavailable: {0}")]
    RoutingUnavailable(String),

    #[error("all selected specialists failed")]
    UpstreamUnavailable(Box<PartialTurn>),

    #[error("synthesis failed: {reason}")]
    SynthesisFailed { reason: String, partial: Box<PartialTurn> },

    #[error("internal error: {0}")]
    Internal(String),
}

/// JSON body of an error response or SSE `error` event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub partial: Option<PartialTurn>,
}

impl TurnError {
    pub fn status_code(&self) -> u16 {
        match self {
            TurnError::BadRequest(_) => 400,
            TurnError::RoutingUnavailable(_) | TurnError::UpstreamUnavailable(_) => 503,
            TurnError::SynthesisFailed { .. } => 207,
            TurnError::Internal(_) => 500,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            TurnError::BadRequest(_) => "bad_request",
            TurnError::RoutingUnavailable(_) => "routing_unavailable",
            TurnError::UpstreamUnavailable(_) => "upstream_unavailable",
            TurnError::SynthesisFailed { .. } => "synthesis_failed",
            TurnError::Internal(_) => "internal",
        }
    }

    pub fn body(&self) -> ErrorBody {
        let partial = match self {
            TurnError::UpstreamUnavailable(p) | TurnError::SynthesisFailed { partial: p, .. } => {
                Some((**p).clone())
            }
            _ => None,
        };
        ErrorBody {
            error: self.code().to_string(),
            message: self.to_string(),
            partial,
        }
    }
}

fn from_scoring(err: CoreError) -> TurnError {
    match err {
        CoreError::InvalidInput(m) => TurnError::BadRequest(m),
        CoreError::RoutingUnavailable(m) | CoreError::Protocol(m) => TurnError::RoutingUnavailable(m),
        other => TurnError::Internal(other.to_string()),
    }
}

/// Stage events for streaming clients, in emission order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", content = "data", rename_all = "snake_case")]
pub enum TurnEvent {
    Routing(RoutingDecision),
    Specialist(SpecialistResponse),
    Final(Box<ChatTurnResponse>),
    Error(ErrorBody),
}

impl TurnEvent {
    pub fn name(&self) -> &'static str {
        match self {
            TurnEvent::Routing(_) => "routing",
            TurnEvent::Specialist(_) => "specialist",
            TurnEvent::Final(_) => "final",
            TurnEvent::Error(_) => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteResponse {
    pub scores: Vec<LabelScore>,
    pub decision: RoutingDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialistInfo {
    pub id: String,
    pub display_name: String,
    pub model_id: String,
}

pub struct Gateway {
    client: ModelClient,
    scorer: Scorer,
    strategy: SelectionStrategy,
    registry: SpecialistRegistry,
    orchestrator: OrchestratorConfig,
    reformulator: ReformulatorConfig,
    sessions: SessionStore,
}

impl Gateway {
    /// Builds the pipeline, loading the scorer named in the config.
    pub fn from_config(config: &GatewayConfig) -> Result<Self, ConfigError> {
        let scorer = Scorer::from_spec(&config.scorer)
            .map_err(|e| ConfigError::Invalid(format!("scorer: {e}")))?;
        Gateway::with_scorer(config, scorer)
    }

    pub fn with_scorer(config: &GatewayConfig, scorer: Scorer) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Gateway {
            client: ModelClient::new(),
            scorer,
            strategy: config.strategy,
            registry: config.registry()?,
            orchestrator: config.orchestrator.clone(),
            reformulator: config.effective_reformulator(),
            sessions: SessionStore::new(config.state_dir.clone()),
        })
    }

    pub fn with_client(mut self, client: ModelClient) -> Self {
        self.client = client;
        self
    }

    pub fn strategy(&self) -> SelectionStrategy {
        self.strategy
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }

    pub fn specialists(&self) -> Vec<SpecialistInfo> {
        self.registry
            .iter()
            .map(|c| SpecialistInfo {
                id: c.specialty.id.clone(),
                display_name: c.specialty.display_name.clone(),
                model_id: c.model_id.clone(),
            })
            .collect()
    }

    pub async fn session(&self, id: &str) -> Option<ConversationState> {
        self.sessions.get(id).await
    }

    /// Scoring and selection only.
    pub async fn handle_route(&self, text: &str) -> Result<RouteResponse, TurnError> {
        if text.trim().is_empty() {
            return Err(TurnError::BadRequest("text is empty".into()));
        }
        let scores = self.scorer.score(text).await.map_err(from_scoring)?;
        let decision =
            apply_strategy(&scores, self.strategy).map_err(|e| TurnError::Internal(e.to_string()))?;
        Ok(RouteResponse { scores, decision })
    }

    pub async fn handle_chat(&self, request: ChatRequest) -> Result<ChatTurnResponse, TurnError> {
        self.run_turn(request, |_| {}).await
    }

    /// Runs one turn, reporting the routing decision and each specialist
    /// response to `emit` as they happen. `Final`/`Error` are left to the
    /// caller, which owns the result.
    pub async fn run_turn<F>(&self, request: ChatRequest, mut emit: F) -> Result<ChatTurnResponse, TurnError>
    where
        F: FnMut(TurnEvent) + Send,
    {
        let turn_started = Instant::now();
        let message = request.message.trim().to_string();
        if message.is_empty() {
            return Err(TurnError::BadRequest("message is empty".into()));
        }
        let target = match request.target_specialist.as_deref() {
            Some(id) => Some(SpecialtyLabel::from_id(id).map_err(|_| {
                TurnError::BadRequest(format!("unknown target_specialist `{id}`"))
            })?),
            None => None,
        };

        let handle = self.sessions.get_or_create_session(request.session_id.as_deref());
        let mut state = handle.lock().await;
        let mut partial = PartialTurn {
            session_id: Some(state.session_id.clone()),
            ..PartialTurn::default()
        };

        let stage = Instant::now();
        let reformulation = reformulate(&self.client, &state, &message, &self.reformulator).await;
        partial.timings.reformulate_ms = elapsed_ms(stage);
        let question = reformulation.text.clone();
        partial.reformulated_question = Some(question.clone());

        let stage = Instant::now();
        let scores = self.scorer.score(&question).await.map_err(from_scoring)?;
        let decision = match &target {
            Some(label) => RoutingDecision::forced(label, scores.clone()),
            None => apply_strategy(&scores, self.strategy),
        }
        .map_err(|e| TurnError::Internal(e.to_string()))?;
        partial.timings.routing_ms = elapsed_ms(stage);
        partial.router_scores = scores.clone();
        partial.decision = Some(decision.clone());
        emit(TurnEvent::Routing(decision.clone()));

        let stage = Instant::now();
        let dispatched = dispatch(&self.client, &decision, &question, &self.registry, |r| {
            emit(TurnEvent::Specialist(r.clone()))
        })
        .await;
        partial.timings.dispatch_ms = elapsed_ms(stage);
        let result = match dispatched {
            Ok(result) => result,
            Err(DispatchError::UpstreamUnavailable(_, responses)) => {
                partial.contributions = responses;
                partial.timings.total_ms = elapsed_ms(turn_started);
                return Err(TurnError::UpstreamUnavailable(Box::new(partial)));
            }
            Err(DispatchError::Configuration(m)) => return Err(TurnError::Internal(m)),
        };
        partial.contributions = result.responses.clone();

        let stage = Instant::now();
        let synthesized =
            synthesize(&self.client, &question, &result, &decision, &self.orchestrator).await;
        partial.timings.synthesis_ms = elapsed_ms(stage);
        let answer = match synthesized {
            Ok(answer) => answer,
            Err(SynthesisError::Failed { reason, contributions }) => {
                partial.contributions = contributions;
                partial.timings.total_ms = elapsed_ms(turn_started);
                return Err(TurnError::SynthesisFailed {
                    reason,
                    partial: Box::new(partial),
                });
            }
            Err(err @ SynthesisError::NoUsableContribution) => {
                return Err(TurnError::Internal(err.to_string()))
            }
        };

        *state = append_turn(state.clone(), &message, &question, answer.clone());
        if let Err(err) = self.sessions.persist(&state) {
            tracing::warn!(session = %state.session_id, error = %err, "session snapshot failed");
        }
        let mut timings = partial.timings;
        timings.total_ms = elapsed_ms(turn_started);
        Ok(ChatTurnResponse {
            session_id: state.session_id.clone(),
            final_answer: answer,
            router_scores: scores,
            reformulated_question: question,
            degraded: reformulation.degraded || result.degraded,
            timings,
        })
    }
}

fn elapsed_ms(since: Instant) -> u64 {
    since.elapsed().as_millis() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_statuses() {
        assert_eq!(TurnError::BadRequest("x".into()).status_code(), 400);
        assert_eq!(TurnError::UpstreamUnavailable(Box::default()).status_code(), 503);
        let partial = TurnError::SynthesisFailed {
            reason: "r".into(),
            partial: Box::default(),
        };
        assert_eq!(partial.status_code(), 207);
        assert_eq!(partial.body().error, "synthesis_failed");
    }

    #[test]
    fn chat_request_optional_fields() {
        let request: ChatRequest = serde_json::from_str(r#"{"message":"ciao"}"#).unwrap();
        assert_eq!(request, ChatRequest::new("ciao"));
        let request: ChatRequest =
            serde_json::from_str(r#"{"message":"x","session_id":"s","target_specialist":"neurology"}"#)
                .unwrap();
        assert_eq!(request, ChatRequest::new("x").in_session("s").targeting("neurology"));
    }
}
