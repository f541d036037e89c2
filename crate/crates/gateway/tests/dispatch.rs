mod common;

use std::time::Instant;

use common::{fast_client, label, MockStack};
use medroute_core::label::{scores_from_values, LabelScore};
use medroute_core::router::select_top_n;
use medroute_core::{ResponseStatus, RoutingDecision};
use medroute_gateway::mock::{spawn_mock_backend, FailureMode, MockBehavior};
use medroute_gateway::orchestrator::{synthesize, OrchestratorConfig, SynthesisError};
use medroute_gateway::specialists::{dispatch, DispatchError, SpecialistConfig, SpecialistRegistry};

/// Scores that rank the given label ids first, in that order.
fn decision_for(ids: &[&str]) -> RoutingDecision {
    let mut values = [0.01; 10];
    for (rank, id) in ids.iter().enumerate() {
        values[label(id).index().unwrap()] = 0.9 - rank as f64 * 0.1;
    }
    select_top_n(&scores_from_values(&values).unwrap(), ids.len()).unwrap()
}

async fn registry_with(entries: Vec<(&str, MockBehavior, u64)>) -> (SpecialistRegistry, Vec<medroute_gateway::mock::MockBackend>) {
    let mut mocks = Vec::new();
    let mut configs = Vec::new();
    for (id, behavior, timeout_ms) in entries {
        let mock = spawn_mock_backend(behavior).await.unwrap();
        let mut config = SpecialistConfig::new(label(id), mock.url(), id);
        config.timeout_ms = timeout_ms;
        configs.push(config);
        mocks.push(mock);
    }
    (SpecialistRegistry::new(configs).unwrap(), mocks)
}

#[tokio::test]
async fn three_slow_specialists_run_concurrently() {
    let ids = ["neurology", "orthopedics", "gynecology"];
    let (registry, _mocks) = registry_with(
        ids.iter()
            .map(|id| (*id, MockBehavior::fixed(*id).with_delay(100), 2_000))
            .collect(),
    )
    .await;
    let client = fast_client();
    // Warm the connection pool so the measurement is about fan-out.
    dispatch(&client, &decision_for(&ids), "q", &registry, |_| {}).await.unwrap();

    let started = Instant::now();
    let result = dispatch(&client, &decision_for(&ids), "q", &registry, |_| {}).await.unwrap();
    let wall = started.elapsed().as_millis();
    assert!(wall < 250, "wall clock {wall} ms");
    assert!(result.elapsed_ms < 250);
    assert!(!result.degraded);
    assert_eq!(result.responses.len(), 3);
}

#[tokio::test]
async fn single_specialist_answer() {
    let (registry, _mocks) =
        registry_with(vec![("neurology", MockBehavior::fixed("ANSWER-A"), 2_000)]).await;
    let result = dispatch(&fast_client(), &decision_for(&["neurology"]), "q", &registry, |_| {})
        .await
        .unwrap();
    assert_eq!(result.responses.len(), 1);
    assert_eq!(result.responses[0].status, ResponseStatus::Ok);
    assert_eq!(result.responses[0].text, "ANSWER-A");
    assert!(!result.degraded);
}

#[tokio::test]
async fn timeout_degrades_only_that_specialist() {
    let (registry, _mocks) = registry_with(vec![
        ("neurology", MockBehavior::fixed("fine"), 2_000),
        ("orthopedics", MockBehavior::failing(FailureMode::Hang), 200),
    ])
    .await;
    let started = Instant::now();
    let result = dispatch(
        &fast_client(),
        &decision_for(&["neurology", "orthopedics"]),
        "q",
        &registry,
        |_| {},
    )
    .await
    .unwrap();
    assert!(started.elapsed().as_millis() < 500);
    assert!(result.degraded);
    assert_eq!(result.responses[0].status, ResponseStatus::Ok);
    assert_eq!(result.responses[0].text, "fine");
    assert_eq!(result.responses[1].status, ResponseStatus::Timeout);
    assert!(result.responses[1].text.is_empty());
}

#[tokio::test]
async fn order_follows_selection_not_completion() {
    let (registry, _mocks) = registry_with(vec![
        ("neurology", MockBehavior::fixed("slow").with_delay(150), 2_000),
        ("orthopedics", MockBehavior::fixed("fast"), 2_000),
    ])
    .await;
    let decision = decision_for(&["neurology", "orthopedics"]);
    let before = decision.clone();
    let mut completed = Vec::new();
    let result = dispatch(&fast_client(), &decision, "q", &registry, |r| {
        completed.push(r.specialty.id.clone())
    })
    .await
    .unwrap();
    assert_eq!(decision, before);
    assert_eq!(completed, ["orthopedics", "neurology"]);
    let order: Vec<&str> = result.responses.iter().map(|r| r.specialty.id.as_str()).collect();
    assert_eq!(order, ["neurology", "orthopedics"]);
}

#[tokio::test]
async fn every_request_carries_its_own_system_prompt() {
    let (registry, mocks) = registry_with(vec![
        ("neurology", MockBehavior::echo(), 2_000),
        ("orthopedics", MockBehavior::echo(), 2_000),
    ])
    .await;
    dispatch(&fast_client(), &decision_for(&["neurology", "orthopedics"]), "q", &registry, |_| {})
        .await
        .unwrap();
    let neuro = mocks[0].calls()[0].completion().unwrap();
    let ortho = mocks[1].calls()[0].completion().unwrap();
    assert!(neuro.messages[0].content.contains("Neurology"));
    assert!(ortho.messages[0].content.contains("Orthopedics"));
    assert_eq!(neuro.messages[1].content, "q");
}

#[tokio::test]
async fn all_failed_is_upstream_unavailable() {
    let (registry, _mocks) = registry_with(vec![
        ("neurology", MockBehavior::failing(FailureMode::Http500), 2_000),
        ("orthopedics", MockBehavior::failing(FailureMode::Hang), 100),
    ])
    .await;
    let err = dispatch(
        &fast_client(),
        &decision_for(&["neurology", "orthopedics"]),
        "q",
        &registry,
        |_| {},
    )
    .await
    .unwrap_err();
    match err {
        DispatchError::UpstreamUnavailable(2, responses) => {
            assert_eq!(responses[0].status, ResponseStatus::BackendError);
            assert_eq!(responses[1].status, ResponseStatus::Timeout);
        }
        other => panic!("{other:?}"),
    }
}

#[tokio::test]
async fn unconfigured_label_is_a_configuration_error() {
    let (registry, _mocks) = registry_with(vec![("neurology", MockBehavior::echo(), 2_000)]).await;
    let err = dispatch(&fast_client(), &decision_for(&["gynecology"]), "q", &registry, |_| {})
        .await
        .unwrap_err();
    assert!(matches!(err, DispatchError::Configuration(m) if m.contains("gynecology")));
}

#[tokio::test]
async fn passthrough_makes_no_orchestrator_call() {
    let orchestrator = spawn_mock_backend(MockBehavior::echo_prompt()).await.unwrap();
    let (registry, _mocks) = registry_with(vec![("neurology", MockBehavior::fixed("A"), 2_000)]).await;
    let decision = decision_for(&["neurology"]);
    let client = fast_client();
    let result = dispatch(&client, &decision, "q", &registry, |_| {}).await.unwrap();
    let config = OrchestratorConfig::new(orchestrator.url(), "big");
    let answer = synthesize(&client, "q", &result, &decision, &config).await.unwrap();
    assert_eq!(answer.text, "A");
    assert_eq!(orchestrator.call_count(), 0);
}

#[tokio::test]
async fn echo_orchestrator_covers_every_contribution() {
    let orchestrator = spawn_mock_backend(MockBehavior::echo_prompt()).await.unwrap();
    let (registry, _mocks) = registry_with(vec![
        ("neurology", MockBehavior::fixed("NEURO-TEXT"), 2_000),
        ("orthopedics", MockBehavior::fixed("ORTHO-TEXT"), 2_000),
        ("gynecology", MockBehavior::failing(FailureMode::Hang), 100),
    ])
    .await;
    let decision = decision_for(&["neurology", "orthopedics", "gynecology"]);
    let client = fast_client();
    let result = dispatch(&client, &decision, "q", &registry, |_| {}).await.unwrap();
    let config = OrchestratorConfig::new(orchestrator.url(), "big");
    let answer = synthesize(&client, "q", &result, &decision, &config).await.unwrap();
    assert!(answer.text.contains("[Neurology]: NEURO-TEXT"));
    assert!(answer.text.contains("[Orthopedics]: ORTHO-TEXT"));
    assert!(!answer.text.contains("Gynecology"));
    assert_eq!(answer.contributions.len(), 3);
    assert_eq!(answer.contributions[2].status, ResponseStatus::Timeout);
    assert_eq!(orchestrator.call_count(), 1);
}

#[tokio::test]
async fn orchestrator_failure_keeps_contributions() {
    let orchestrator = spawn_mock_backend(MockBehavior::failing(FailureMode::Http500)).await.unwrap();
    let (registry, _mocks) = registry_with(vec![
        ("neurology", MockBehavior::fixed("A"), 2_000),
        ("orthopedics", MockBehavior::fixed("B"), 2_000),
    ])
    .await;
    let decision = decision_for(&["neurology", "orthopedics"]);
    let client = fast_client();
    let result = dispatch(&client, &decision, "q", &registry, |_| {}).await.unwrap();
    let config = OrchestratorConfig::new(orchestrator.url(), "big");
    let err = synthesize(&client, "q", &result, &decision, &config).await.unwrap_err();
    match err {
        SynthesisError::Failed { contributions, .. } => assert_eq!(contributions, result.responses),
        other => panic!("{other:?}"),
    }
    assert_eq!(orchestrator.call_count(), 3);
}

#[tokio::test]
async fn full_registry_from_the_mock_stack() {
    let stack = MockStack::start().await;
    let registry = stack
        .config(medroute_core::router::SelectionStrategy::TopN { n: 10 })
        .registry()
        .unwrap();
    let all: Vec<LabelScore> = scores_from_values(&[0.5; 10]).unwrap();
    let decision = select_top_n(&all, 10).unwrap();
    let result = dispatch(&fast_client(), &decision, "q", &registry, |_| {}).await.unwrap();
    assert_eq!(result.responses.len(), 10);
    for response in &result.responses {
        assert!(response.text.contains(&common::marker(&response.specialty.id)));
    }
}
