//! Synthesis of specialist answers into one final answer.

use medroute_core::{FinalAnswer, RoutingDecision, SpecialistResponse};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model_client::{ChatMessage, CompletionRequest, ModelClient};
use crate::specialists::DispatchResult;

/// Default synthesis instructions, overridable in config.
pub const DEFAULT_SYNTHESIS_TEMPLATE: &str = "You are a professional medical assistant. \
You receive a patient's question together with answers written by medical specialists, each \
introduced by the specialty name in square brackets. Merge the expert contributions into a \
single clear, evidence-based answer that is appropriate to the context and directly addresses \
the question. Discard contributions that are incorrect or irrelevant, do not mention the \
specialists, and reply in the language of the question.";
pub const SYNTHESIS_TEMPLATE_VERSION: &str = "synthesis-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrchestratorConfig {
    pub endpoint: String,
    pub model_id: String,
    #[serde(default = "default_template")]
    pub synthesis_prompt_template: String,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_true")]
    pub single_specialist_passthrough: bool,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_token: Option<String>,
}

fn default_template() -> String {
    DEFAULT_SYNTHESIS_TEMPLATE.to_string()
}
fn default_timeout() -> u64 {
    60_000
}
fn default_true() -> bool {
    true
}
fn default_retries() -> u32 {
    2
}
fn default_max_tokens() -> u32 {
    1024
}

impl OrchestratorConfig {
    pub fn new(endpoint: impl Into<String>, model_id: impl Into<String>) -> Self {
        OrchestratorConfig {
            endpoint: endpoint.into(),
            model_id: model_id.into(),
            synthesis_prompt_template: default_template(),
            timeout_ms: default_timeout(),
            single_specialist_passthrough: true,
            retries: default_retries(),
            max_tokens: default_max_tokens(),
            temperature: 0.0,
            api_token: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.endpoint.trim().is_empty() {
            return Err("orchestrator endpoint is empty".into());
        }
        if self.model_id.trim().is_empty() {
            return Err("orchestrator model_id is empty".into());
        }
        if self.timeout_ms == 0 {
            return Err("orchestrator timeout_ms must be positive".into());
        }
        if self.max_tokens == 0 {
            return Err("orchestrator max_tokens must be positive".into());
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err("orchestrator temperature must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("no specialist produced a usable answer")]
    NoUsableContribution,

    /// The orchestrator backend failed; the raw contributions are kept so
    /// callers can still show them.
    #[error("synthesis failed: {reason}")]
    Failed {
        reason: String,
        contributions: Vec<SpecialistResponse>,
    },
}

/// System instructions plus one user message holding the question and each
/// ok contribution as `[<Specialty>]: <text>`, in order.
pub fn build_synthesis_prompt(
    template: &str,
    question: &str,
    responses: &[SpecialistResponse],
) -> Result<Vec<ChatMessage>, SynthesisError> {
    let usable: Vec<&SpecialistResponse> = responses.iter().filter(|r| r.is_ok()).collect();
    if usable.is_empty() {
        return Err(SynthesisError::NoUsableContribution);
    }
    let mut user = format!("Question: {question}\n\nSpecialist answers:\n");
    for response in usable {
        user.push_str(&format!(
            "\n[{}]: {}\n",
            response.specialty.display_name, response.text
        ));
    }
    Ok(vec![ChatMessage::system(template), ChatMessage::user(user)])
}

/// Merges the dispatch result into a [`FinalAnswer`]. With passthrough on and a
/// single ok response, that text is returned without contacting the backend.
pub async fn synthesize(
    client: &ModelClient,
    question: &str,
    result: &DispatchResult,
    decision: &RoutingDecision,
    config: &OrchestratorConfig,
) -> Result<FinalAnswer, SynthesisError> {
    let usable: Vec<&SpecialistResponse> = result.responses.iter().filter(|r| r.is_ok()).collect();
    let failed = |reason: String| SynthesisError::Failed {
        reason,
        contributions: result.responses.clone(),
    };
    let text = match usable.as_slice() {
        [] => return Err(SynthesisError::NoUsableContribution),
        [only] if config.single_specialist_passthrough => only.text.clone(),
        _ => {
            let messages =
                build_synthesis_prompt(&config.synthesis_prompt_template, question, &result.responses)?;
            let request = CompletionRequest::new(
                config.model_id.clone(),
                messages,
                config.max_tokens,
                config.temperature,
            )
            .map_err(|e| failed(e.to_string()))?;
            let text = client
                .complete_authorized(
                    &config.endpoint,
                    config.api_token.as_deref(),
                    &request,
                    config.timeout_ms,
                    config.retries,
                )
                .await
                .map_err(|e| failed(e.to_string()))?;
            if text.trim().is_empty() {
                return Err(failed("orchestrator returned an empty answer".into()));
            }
            text
        }
    };
    FinalAnswer::new(
        text,
        decision.clone(),
        result.responses.clone(),
        question.to_string(),
    )
    .map_err(|e| failed(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use medroute_core::label::SpecialtyLabel;
    use medroute_core::ResponseStatus;

    fn ok(id: &str, text: &str) -> SpecialistResponse {
        SpecialistResponse::ok(SpecialtyLabel::from_id(id).unwrap(), text, 1)
    }

    #[test]
    fn contributions_are_labeled_in_order() {
        let messages = build_synthesis_prompt(
            DEFAULT_SYNTHESIS_TEMPLATE,
            "q",
            &[ok("neurology", "A"), ok("orthopedics", "B")],
        )
        .unwrap();
        assert_eq!(messages.len(), 2);
        assert!(messages[0].content.contains("professional medical assistant"));
        let user = &messages[1].content;
        let a = user.find("[Neurology]: A").unwrap();
        let b = user.find("[Orthopedics]: B").unwrap();
        assert!(user.find("q").unwrap() < a && a < b);
    }

    #[test]
    fn failed_contributions_are_omitted() {
        let timeout = SpecialistResponse::failed(
            SpecialtyLabel::from_id("gynecology").unwrap(),
            ResponseStatus::Timeout,
            5,
        );
        let messages =
            build_synthesis_prompt(DEFAULT_SYNTHESIS_TEMPLATE, "q", &[ok("neurology", "A"), timeout])
                .unwrap();
        assert!(!messages[1].content.contains("Gynecology"));
    }

    #[test]
    fn zero_ok_is_rejected() {
        let timeout = SpecialistResponse::failed(
            SpecialtyLabel::from_id("gynecology").unwrap(),
            ResponseStatus::Timeout,
            5,
        );
        assert_eq!(
            build_synthesis_prompt(DEFAULT_SYNTHESIS_TEMPLATE, "q", &[timeout]),
            Err(SynthesisError::NoUsableContribution)
        );
    }

    #[test]
    fn config_defaults() {
        let config: OrchestratorConfig =
            toml::from_str("endpoint = \"http://o\"\nmodel_id = \"big\"\n").unwrap();
        assert!(config.single_specialist_passthrough);
        assert_eq!(config.retries, 2);
        assert_eq!(config.synthesis_prompt_template, DEFAULT_SYNTHESIS_TEMPLATE);
        assert!(config.validate().is_ok());
    }
}
