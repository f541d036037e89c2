use std::path::Path;

use medroute_core::label::label_ids;
use medroute_core::router::{ScorerKind, SelectionStrategy};
use medroute_gateway::config::{load_config, parse_config, ConfigError};

fn reference_path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/gateway.toml")
}

#[test]
fn reference_config_loads_clean() {
    let config = load_config(reference_path()).unwrap();
    assert_eq!(config.specialists.len(), 10);
    assert_eq!(config.scorer.kind, ScorerKind::BuiltinLinear);
    assert!(matches!(config.strategy, SelectionStrategy::Threshold { .. }));
    let ids: Vec<&str> = config.specialists.iter().map(|s| s.specialty.id.as_str()).collect();
    assert!(ids.iter().copied().eq(label_ids()));
    assert!(config.scorer.model_artifact_path.as_ref().unwrap().is_absolute());
    let reformulator = config.effective_reformulator();
    assert_eq!(reformulator.endpoint.as_deref(), Some(config.orchestrator.endpoint.as_str()));
}

fn reference_text() -> String {
    std::fs::read_to_string(reference_path()).unwrap()
}

#[test]
fn api_token_comes_from_the_environment() {
    let text = reference_text().replace(
        "api_token = \"${ORCHESTRATOR_TOKEN:-}\"",
        "api_token = \"${API_TOKEN}\"",
    );
    let lookup = |var: &str| (var == "API_TOKEN").then(|| "tok-123".to_string());
    let config = parse_config(&text, Path::new("/srv"), &lookup).unwrap();
    assert_eq!(config.orchestrator.api_token.as_deref(), Some("tok-123"));

    let err = parse_config(&text, Path::new("/srv"), &|_| None).unwrap_err();
    assert!(matches!(err, ConfigError::MissingEnv { ref var, .. } if var == "API_TOKEN"), "{err}");
}

#[test]
fn nine_specialists_names_the_missing_one() {
    let text = reference_text();
    let start = text.find("[[specialists]]\nspecialty = \"mental_health\"").unwrap();
    let end = start + text[start + 1..].find("[[specialists]]").unwrap() + 1;
    let trimmed = format!("{}{}", &text[..start], &text[end..]);
    let err = parse_config(&trimmed, Path::new("."), &|_| None).unwrap_err();
    assert!(err.to_string().contains("mental_health"), "{err}");
}

#[test]
fn unknown_keys_are_rejected() {
    let text = format!("bogus = 1\n{}", reference_text());
    assert!(matches!(
        parse_config(&text, Path::new("."), &|_| None),
        Err(ConfigError::Parse(_))
    ));
}
