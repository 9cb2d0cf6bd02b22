//! Gateway configuration file.
//!
//! TOML with two tables, both optional:
//!
//! ```toml
//! [model]
//! endpoint = "https://api.example.com/v1/chat/completions"
//! name = "gpt-4o"
//!
//! [agent]
//! max_iterations = 10
//! context_budget = 16384
//! ```
//!
//! The API key is never read from the file; it comes from
//! `ROSA_MODEL_API_KEY`.

use std::path::Path;

use serde::Deserialize;
use teleop_core::agent::AgentConfig;

use crate::GatewayError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub agent: ConfigOverrides,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub endpoint: Option<String>,
    pub name: Option<String>,
}

/// Partial agent settings, layered over the defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub max_iterations: Option<u32>,
    pub context_budget: Option<usize>,
    pub require_confirmation_for_uplink: Option<bool>,
    pub scratchpad_budget: Option<usize>,
}

impl ConfigOverrides {
    /// Apply on top of `base` and validate the result.
    pub fn apply(&self, base: AgentConfig) -> Result<AgentConfig, GatewayError> {
        let mut c = base;
        if let Some(v) = self.max_iterations {
            c.max_iterations = v;
        }
        if let Some(v) = self.context_budget {
            c.context_budget = v;
        }
        if let Some(v) = self.require_confirmation_for_uplink {
            c.require_confirmation_for_uplink = v;
        }
        if let Some(v) = self.scratchpad_budget {
            c.scratchpad_budget = v;
        }
        c.validate().map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        Ok(c)
    }
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, GatewayError> {
        toml::from_str(text).map_err(|e| GatewayError::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_file() {
        let c = FileConfig::parse(
            "[model]\nendpoint = \"http://x\"\nname = \"m\"\n[agent]\nmax_iterations = 4\ncontext_budget = 9000\n",
        )
        .unwrap();
        assert_eq!(c.model.endpoint.as_deref(), Some("http://x"));
        let a = c.agent.apply(AgentConfig::default()).unwrap();
        assert_eq!((a.max_iterations, a.context_budget), (4, 9000));
    }

    #[test]
    fn empty_file_is_defaults() {
        let c = FileConfig::parse("").unwrap();
        assert_eq!(c.agent.apply(AgentConfig::default()).unwrap(), AgentConfig::default());
    }

    #[test]
    fn unknown_key_and_small_budget_are_rejected() {
        assert!(FileConfig::parse("[agent]\nbudget = 1\n").is_err());
        let c = FileConfig::parse("[agent]\ncontext_budget = 4096\n").unwrap();
        let err = c.agent.apply(AgentConfig::default()).unwrap_err();
        assert!(err.to_string().contains("8192"), "{err}");
    }
}
