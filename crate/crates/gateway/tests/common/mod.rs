//! Shared fixtures: a full mock deployment and small protocol helpers.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use medroute_core::label::{default_label_registry, SpecialtyLabel};
use medroute_core::router::{
    train_builtin_scorer, LinearScorerModel, ScorerKind, ScorerSpec, SelectionStrategy,
};
use medroute_core::synthetic::SyntheticCorpus;
use medroute_gateway::config::GatewayConfig;
use medroute_gateway::conversation::ReformulatorConfig;
use medroute_gateway::mock::{spawn_mock_backend, MockBackend, MockBehavior};
use medroute_gateway::model_client::ModelClient;
use medroute_gateway::orchestrator::OrchestratorConfig;
use medroute_gateway::scoring::Scorer;
use medroute_gateway::specialists::SpecialistConfig;
use medroute_gateway::Gateway;

pub const REWRITE: &str = "REWRITTEN-QUESTION";

pub fn marker(id: &str) -> String {
    format!("MARKER-{}", id.to_uppercase())
}

pub fn label(id: &str) -> SpecialtyLabel {
    SpecialtyLabel::from_id(id).unwrap()
}

pub fn fast_client() -> ModelClient {
    ModelClient::new().with_backoff_base(Duration::from_millis(5))
}

/// Builtin scorer trained on a 200-example synthetic corpus.
pub fn trained_model() -> LinearScorerModel {
    let corpus = SyntheticCorpus::new(7).generate(200);
    train_builtin_scorer(&corpus, 1 << 12, 8, 7).unwrap()
}

/// Ten scripted specialists, an orchestrator echoing its prompt and a
/// separate reformulator with a fixed rewrite.
pub struct MockStack {
    pub specialists: Vec<(String, MockBackend)>,
    pub orchestrator: MockBackend,
    pub reformulator: MockBackend,
    pub model: Arc<LinearScorerModel>,
    pub state_dir: tempfile::TempDir,
}

impl MockStack {
    pub async fn start() -> Self {
        let mut specialists = Vec::new();
        for l in default_label_registry() {
            let behavior = MockBehavior::fixed(format!("{} risponde.", marker(&l.id)));
            specialists.push((l.id.clone(), spawn_mock_backend(behavior).await.unwrap()));
        }
        let orchestrator = spawn_mock_backend(MockBehavior::echo_prompt()).await.unwrap();
        let reformulator = spawn_mock_backend(MockBehavior::fixed(REWRITE)).await.unwrap();
        MockStack {
            specialists,
            orchestrator,
            reformulator,
            model: Arc::new(trained_model()),
            state_dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn specialist(&self, id: &str) -> &MockBackend {
        &self.specialists.iter().find(|(k, _)| k == id).unwrap().1
    }

    pub fn config(&self, strategy: SelectionStrategy) -> GatewayConfig {
        let specialists = self
            .specialists
            .iter()
            .map(|(id, mock)| {
                let mut c = SpecialistConfig::new(label(id), mock.url(), format!("{id}-1b"));
                c.timeout_ms = 2_000;
                c
            })
            .collect();
        let mut orchestrator = OrchestratorConfig::new(self.orchestrator.url(), "orchestrator");
        orchestrator.timeout_ms = 2_000;
        GatewayConfig {
            listen: "127.0.0.1:0".into(),
            scorer: ScorerSpec {
                kind: ScorerKind::BuiltinLinear,
                remote_endpoint: None,
                model_artifact_path: Some(PathBuf::from("router.json")),
            },
            strategy,
            specialists,
            orchestrator,
            reformulator: ReformulatorConfig {
                endpoint: Some(self.reformulator.url().to_string()),
                model_id: Some("rewriter".into()),
                timeout_ms: 2_000,
                ..ReformulatorConfig::default()
            },
            state_dir: Some(self.state_dir.path().to_path_buf()),
        }
    }

    pub fn gateway_with(&self, config: &GatewayConfig) -> Gateway {
        Gateway::with_scorer(config, Scorer::Builtin(self.model.clone()))
            .unwrap()
            .with_client(fast_client())
    }

    pub fn gateway(&self, strategy: SelectionStrategy) -> Gateway {
        self.gateway_with(&self.config(strategy))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SseEvent {
    pub id: Option<u64>,
    pub event: String,
    pub data: String,
}

/// Parses a complete `text/event-stream` body; comment lines are skipped.
pub fn parse_sse(body: &str) -> Vec<SseEvent> {
    let mut events = Vec::new();
    for block in body.replace("\r\n", "\n").split("\n\n") {
        let mut id = None;
        let mut event = String::from("message");
        let mut data = Vec::new();
        let mut seen = false;
        for line in block.lines() {
            if let Some(v) = line.strip_prefix("id:") {
                id = v.trim().parse().ok();
                seen = true;
            } else if let Some(v) = line.strip_prefix("event:") {
                event = v.trim().to_string();
                seen = true;
            } else if let Some(v) = line.strip_prefix("data:") {
                data.push(v.strip_prefix(' ').unwrap_or(v).to_string());
                seen = true;
            }
        }
        if seen && !data.is_empty() {
            events.push(SseEvent {
                id,
                event,
                data: data.join("\n"),
            });
        }
    }
    events
}
