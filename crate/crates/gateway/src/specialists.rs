//! Specialist registry and concurrent scatter-gather dispatch.

use std::collections::BTreeMap;
use std::time::Instant;

use futures::stream::{FuturesUnordered, StreamExt};
use medroute_core::label::{default_label_registry, SpecialtyLabel};
use medroute_core::{ResponseStatus, RoutingDecision, SpecialistResponse};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model_client::{ChatMessage, ClientError, CompletionRequest, ModelClient};

pub const DEFAULT_SPECIALIST_TEMPLATE: &str = "You are a medical specialist in {specialty_name}. \
Answer the patient's question accurately and clearly, using the terminology of your field. \
Reply in the language of the question.";
pub const DEFAULT_SPECIALIST_TIMEOUT_MS: u64 = 30_000;
pub const DEFAULT_MAX_TOKENS: u32 = 512;
pub const DEFAULT_TEMPERATURE: f64 = 0.2;

const PLACEHOLDER: &str = "{specialty_name}";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispatchError {
    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("all {0} selected specialist(s) failed")]
    UpstreamUnavailable(usize, Vec<SpecialistResponse>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpecialistConfig", into = "RawSpecialistConfig")]
pub struct SpecialistConfig {
    pub specialty: SpecialtyLabel,
    pub endpoint: String,
    pub model_id: String,
    pub system_prompt_template: String,
    pub timeout_ms: u64,
    pub max_tokens: u32,
    pub temperature: f64,
    /// Client-level retries for transient failures.
    pub retries: u32,
    pub api_token: Option<String>,
}

/// Config-file shape: the specialty is written as its label id.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpecialistConfig {
    specialty: String,
    endpoint: String,
    model_id: String,
    #[serde(default = "default_template")]
    system_prompt_template: String,
    #[serde(default = "default_timeout")]
    timeout_ms: u64,
    #[serde(default = "default_max_tokens")]
    max_tokens: u32,
    #[serde(default = "default_temperature")]
    temperature: f64,
    #[serde(default)]
    retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    api_token: Option<String>,
}

fn default_template() -> String {
    DEFAULT_SPECIALIST_TEMPLATE.to_string()
}
fn default_timeout() -> u64 {
    DEFAULT_SPECIALIST_TIMEOUT_MS
}
fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}
fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

impl TryFrom<RawSpecialistConfig> for SpecialistConfig {
    type Error = String;

    fn try_from(raw: RawSpecialistConfig) -> Result<Self, String> {
        let specialty = SpecialtyLabel::from_id(&raw.specialty).map_err(|e| e.to_string())?;
        let config = SpecialistConfig {
            specialty,
            endpoint: raw.endpoint,
            model_id: raw.model_id,
            system_prompt_template: raw.system_prompt_template,
            timeout_ms: raw.timeout_ms,
            max_tokens: raw.max_tokens,
            temperature: raw.temperature,
            retries: raw.retries,
            api_token: raw.api_token,
        };
        Ok(config)
    }
}

impl From<SpecialistConfig> for RawSpecialistConfig {
    fn from(c: SpecialistConfig) -> Self {
        RawSpecialistConfig {
            specialty: c.specialty.id,
            endpoint: c.endpoint,
            model_id: c.model_id,
            system_prompt_template: c.system_prompt_template,
            timeout_ms: c.timeout_ms,
            max_tokens: c.max_tokens,
            temperature: c.temperature,
            retries: c.retries,
            api_token: c.api_token,
        }
    }
}

impl SpecialistConfig {
    /// Defaults for everything but the backend location.
    pub fn new(specialty: SpecialtyLabel, endpoint: impl Into<String>, model_id: impl Into<String>) -> Self {
        SpecialistConfig {
            specialty,
            endpoint: endpoint.into(),
            model_id: model_id.into(),
            system_prompt_template: default_template(),
            timeout_ms: DEFAULT_SPECIALIST_TIMEOUT_MS,
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: DEFAULT_TEMPERATURE,
            retries: 0,
            api_token: None,
        }
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        let id = &self.specialty.id;
        let bad = |what: &str| DispatchError::Configuration(format!("specialist `{id}`: {what}"));
        if self.endpoint.trim().is_empty() {
            return Err(bad("endpoint is empty"));
        }
        if self.model_id.trim().is_empty() {
            return Err(bad("model_id is empty"));
        }
        if self.timeout_ms == 0 {
            return Err(bad("timeout_ms must be positive"));
        }
        if self.max_tokens == 0 {
            return Err(bad("max_tokens must be positive"));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(bad("temperature must be a finite non-negative number"));
        }
        render_system_prompt(&self.system_prompt_template, &self.specialty)?;
        Ok(())
    }
}

/// Substitutes `{specialty_name}`; any other `{...}` placeholder is an error.
pub fn render_system_prompt(template: &str, specialty: &SpecialtyLabel) -> Result<String, DispatchError> {
    let stripped = template.replace(PLACEHOLDER, "");
    if let Some(start) = stripped.find('{') {
        let rest = &stripped[start..];
        let end = rest.find('}').map_or(rest.len(), |i| i + 1);
        return Err(DispatchError::Configuration(format!(
            "unresolved placeholder `{}` in system prompt template",
            &rest[..end]
        )));
    }
    Ok(template.replace(PLACEHOLDER, &specialty.display_name))
}

pub fn render_specialist_prompt(
    config: &SpecialistConfig,
    question: &str,
) -> Result<Vec<ChatMessage>, DispatchError> {
    if question.trim().is_empty() {
        return Err(DispatchError::Configuration("question is empty".into()));
    }
    let system = render_system_prompt(&config.system_prompt_template, &config.specialty)?;
    Ok(vec![ChatMessage::system(system), ChatMessage::user(question)])
}

/// Read-only map from label id to backend configuration.
#[derive(Debug, Clone, Default)]
pub struct SpecialistRegistry {
    configs: BTreeMap<String, SpecialistConfig>,
}

impl SpecialistRegistry {
    pub fn new(configs: impl IntoIterator<Item = SpecialistConfig>) -> Result<Self, DispatchError> {
        let mut map = BTreeMap::new();
        for config in configs {
            config.validate()?;
            let id = config.specialty.id.clone();
            if map.insert(id.clone(), config).is_some() {
                return Err(DispatchError::Configuration(format!(
                    "specialist `{id}` is configured twice"
                )));
            }
        }
        Ok(SpecialistRegistry { configs: map })
    }

    /// Fails naming the first registry label without a backend.
    pub fn require_complete(&self) -> Result<(), DispatchError> {
        match default_label_registry()
            .into_iter()
            .find(|l| !self.configs.contains_key(&l.id))
        {
            Some(missing) => Err(DispatchError::Configuration(format!(
                "no specialist configured for label `{}`",
                missing.id
            ))),
            None => Ok(()),
        }
    }

    pub fn get(&self, id: &str) -> Option<&SpecialistConfig> {
        self.configs.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SpecialistConfig> {
        self.configs.values()
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchResult {
    /// In the decision's selection order.
    pub responses: Vec<SpecialistResponse>,
    pub elapsed_ms: u64,
    pub degraded: bool,
}

async fn ask(
    client: &ModelClient,
    config: &SpecialistConfig,
    messages: Vec<ChatMessage>,
) -> SpecialistResponse {
    let started = Instant::now();
    let specialty = config.specialty.clone();
    let request = match CompletionRequest::new(
        config.model_id.clone(),
        messages,
        config.max_tokens,
        config.temperature,
    ) {
        Ok(request) => request,
        Err(_) => return SpecialistResponse::failed(specialty, ResponseStatus::BackendError, 0),
    };
    let outcome = client
        .complete_authorized(
            &config.endpoint,
            config.api_token.as_deref(),
            &request,
            config.timeout_ms,
            config.retries,
        )
        .await;
    let latency_ms = started.elapsed().as_millis() as u64;
    match outcome {
        Ok(text) => SpecialistResponse::ok(specialty, text, latency_ms),
        Err(ClientError::Timeout { .. }) => {
            tracing::warn!(specialty = %specialty.id, latency_ms, "specialist timed out");
            SpecialistResponse::failed(specialty, ResponseStatus::Timeout, latency_ms)
        }
        Err(err) => {
            tracing::warn!(specialty = %specialty.id, error = %err, "specialist failed");
            SpecialistResponse::failed(specialty, ResponseStatus::BackendError, latency_ms)
        }
    }
}

/// Sends `question` to every selected specialist at once and waits for all of
/// them. `on_complete` sees each response as soon as it arrives.
pub async fn dispatch<F>(
    client: &ModelClient,
    decision: &RoutingDecision,
    question: &str,
    registry: &SpecialistRegistry,
    mut on_complete: F,
) -> Result<DispatchResult, DispatchError>
where
    F: FnMut(&SpecialistResponse) + Send,
{
    let mut jobs = Vec::with_capacity(decision.selected.len());
    for chosen in &decision.selected {
        let config = registry.get(&chosen.label.id).ok_or_else(|| {
            DispatchError::Configuration(format!(
                "no specialist configured for label `{}`",
                chosen.label.id
            ))
        })?;
        jobs.push((config, render_specialist_prompt(config, question)?));
    }

    let started = Instant::now();
    let mut pending: FuturesUnordered<_> = jobs
        .into_iter()
        .enumerate()
        .map(|(slot, (config, messages))| async move { (slot, ask(client, config, messages).await) })
        .collect();
    let mut slots: Vec<Option<SpecialistResponse>> = vec![None; decision.selected.len()];
    while let Some((slot, response)) = pending.next().await {
        on_complete(&response);
        slots[slot] = Some(response);
    }
    let responses: Vec<SpecialistResponse> = slots.into_iter().flatten().collect();
    let elapsed_ms = started.elapsed().as_millis() as u64;
    if !responses.iter().any(SpecialistResponse::is_ok) {
        return Err(DispatchError::UpstreamUnavailable(responses.len(), responses));
    }
    let degraded = responses.iter().any(|r| !r.is_ok());
    Ok(DispatchResult {
        responses,
        elapsed_ms,
        degraded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neurology() -> SpecialtyLabel {
        SpecialtyLabel::from_id("neurology").unwrap()
    }

    #[test]
    fn substitutes_specialty_name() {
        let mut config = SpecialistConfig::new(neurology(), "http://x", "m");
        config.system_prompt_template = "You are a specialist in {specialty_name}.".into();
        let messages = render_specialist_prompt(&config, "q").unwrap();
        assert_eq!(messages[0].content, "You are a specialist in Neurology.");
        assert_eq!(messages[1].content, "q");
    }

    #[test]
    fn unknown_placeholder_is_rejected() {
        let mut config = SpecialistConfig::new(neurology(), "http://x", "m");
        config.system_prompt_template = "Hi {foo} from {specialty_name}".into();
        let err = render_specialist_prompt(&config, "q").unwrap_err();
        assert!(err.to_string().contains("{foo}"), "{err}");
        assert!(config.validate().is_err());
    }

    #[test]
    fn registry_reports_missing_label() {
        let configs = default_label_registry()
            .into_iter()
            .filter(|l| l.id != "gynecology")
            .map(|l| SpecialistConfig::new(l, "http://x", "m"));
        let registry = SpecialistRegistry::new(configs).unwrap();
        let err = registry.require_complete().unwrap_err();
        assert!(err.to_string().contains("gynecology"));
    }

    #[test]
    fn duplicate_specialist_is_rejected() {
        let a = SpecialistConfig::new(neurology(), "http://x", "m");
        assert!(SpecialistRegistry::new([a.clone(), a]).is_err());
    }

    #[test]
    fn config_file_shape_uses_label_id() {
        let config: SpecialistConfig = toml::from_str(
            "specialty = \"neurology\"\nendpoint = \"http://n\"\nmodel_id = \"neuro-1b\"\n",
        )
        .unwrap();
        assert_eq!(config.specialty, neurology());
        assert_eq!(config.timeout_ms, DEFAULT_SPECIALIST_TIMEOUT_MS);
        assert_eq!(config.system_prompt_template, DEFAULT_SPECIALIST_TEMPLATE);
        assert!(toml::from_str::<SpecialistConfig>(
            "specialty = \"dentistry\"\nendpoint = \"http://n\"\nmodel_id = \"m\"\n"
        )
        .is_err());
    }
}
