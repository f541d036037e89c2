//! Gateway configuration file (TOML).
//!
//! Endpoint and token values may contain `${VAR}` or `${VAR:-default}`
//! placeholders, resolved from the environment at load time. Relative paths
//! are resolved against the directory holding the config file.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use medroute_core::router::{ScorerSpec, SelectionStrategy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conversation::ReformulatorConfig;
use crate::orchestrator::OrchestratorConfig;
use crate::specialists::{SpecialistConfig, SpecialistRegistry};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("environment variable `{var}` used in `{field}` is not set")]
    MissingEnv { var: String, field: String },

    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    pub scorer: ScorerSpec,
    pub strategy: SelectionStrategy,
    #[serde(default)]
    pub specialists: Vec<SpecialistConfig>,
    pub orchestrator: OrchestratorConfig,
    #[serde(default)]
    pub reformulator: ReformulatorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_dir: Option<PathBuf>,
}

fn default_listen() -> String {
    DEFAULT_LISTEN.to_string()
}

/// Expands `${VAR}` and `${VAR:-default}` using `lookup`.
pub fn expand_placeholders(
    value: &str,
    field: &str,
    lookup: &dyn Fn(&str) -> Option<String>,
) -> Result<String, ConfigError> {
    let mut out = String::with_capacity(value.len());
    let mut rest = value;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find('}').ok_or_else(|| {
            ConfigError::Invalid(format!("unterminated placeholder in `{field}`"))
        })?;
        let body = &after[..end];
        let (var, default) = match body.split_once(":-") {
            Some((var, default)) => (var, Some(default)),
            None => (body, None),
        };
        if var.is_empty() {
            return Err(ConfigError::Invalid(format!("empty placeholder in `{field}`")));
        }
        match (lookup(var).filter(|v| !v.is_empty()), default) {
            (Some(v), _) => out.push_str(&v),
            (None, Some(default)) => out.push_str(default),
            (None, None) => {
                return Err(ConfigError::MissingEnv {
                    var: var.to_string(),
                    field: field.to_string(),
                })
            }
        }
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

impl GatewayConfig {
    /// Validates every invariant: ten specialists, strategy ranges, backend
    /// settings, listen address.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(e);
        self.listen
            .parse::<SocketAddr>()
            .map_err(|e| invalid(format!("listen address `{}`: {e}", self.listen)))?;
        self.scorer.validate().map_err(|e| invalid(e.to_string()))?;
        self.strategy.validate().map_err(|e| invalid(e.to_string()))?;
        self.registry()?;
        self.orchestrator.validate().map_err(invalid)?;
        self.reformulator.validate().map_err(invalid)?;
        Ok(())
    }

    pub fn registry(&self) -> Result<SpecialistRegistry, ConfigError> {
        let registry = SpecialistRegistry::new(self.specialists.iter().cloned())
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        registry
            .require_complete()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(registry)
    }

    /// Reformulator settings with orchestrator fallbacks applied.
    pub fn effective_reformulator(&self) -> ReformulatorConfig {
        self.reformulator.clone().inherit_from(&self.orchestrator)
    }

    fn resolve_env(&mut self, lookup: &dyn Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn opt(
            value: &mut Option<String>,
            field: &str,
            lookup: &dyn Fn(&str) -> Option<String>,
        ) -> Result<(), ConfigError> {
            if let Some(v) = value.as_mut() {
                *v = expand_placeholders(v, field, lookup)?;
            }
            Ok(())
        }
        opt(&mut self.scorer.remote_endpoint, "scorer.remote_endpoint", lookup)?;
        self.orchestrator.endpoint =
            expand_placeholders(&self.orchestrator.endpoint, "orchestrator.endpoint", lookup)?;
        opt(&mut self.orchestrator.api_token, "orchestrator.api_token", lookup)?;
        opt(&mut self.reformulator.endpoint, "reformulator.endpoint", lookup)?;
        opt(&mut self.reformulator.api_token, "reformulator.api_token", lookup)?;
        for s in &mut self.specialists {
            let id = s.specialty.id.clone();
            s.endpoint = expand_placeholders(&s.endpoint, &format!("specialists.{id}.endpoint"), lookup)?;
            opt(&mut s.api_token, &format!("specialists.{id}.api_token"), lookup)?;
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let absolutize = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.scorer.model_artifact_path.as_mut() {
            absolutize(p);
        }
        if let Some(p) = self.state_dir.as_mut() {
            absolutize(p);
        }
    }
}

/// Parses and validates config text. Relative paths resolve against `base_dir`.
pub fn parse_config(
    text: &str,
    base_dir: &Path,
    lookup: &dyn Fn(&str) -> Option<String>,
) -> Result<GatewayConfig, ConfigError> {
    let mut config: GatewayConfig = toml::from_str(text)?;
    config.resolve_env(lookup)?;
    config.resolve_paths(base_dir);
    config.validate()?;
    Ok(config)
}

/// Reads, resolves and validates the config file at `path`.
pub fn load_config(path: impl AsRef<Path>) -> Result<GatewayConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base, &|var| std::env::var(var).ok())
}
