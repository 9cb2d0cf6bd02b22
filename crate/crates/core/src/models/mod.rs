//! Model backends.
//!
//! The agent only sees [`ModelBackend::complete`]: an assembled message
//! list in, raw content text out. [`ScriptedBackend`] answers from a rule
//! file and is what tests and demos run against; [`RemoteBackend`] talks to
//! a chat-completions style HTTP endpoint.

mod eval;
mod remote;
mod script;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agent::Message;

pub use self::eval::{eval, EvalError};
pub use self::remote::{RemoteBackend, RemoteConfig, RetryPolicy, API_KEY_ENV};
pub use self::script::{Script, ScriptError, ScriptedBackend};

/// Smallest context window a backend may offer.
pub const MIN_CONTEXT_TOKENS: usize = 8192;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRequest {
    /// The assembled context.
    pub messages: Vec<Message>,
    /// Catalog entries, one JSON object per tool.
    pub tools: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelCapabilities {
    pub supports_tool_calling: bool,
    pub max_context_tokens: usize,
}

/// Checks the two hard requirements on a backend. `Err` carries the reason.
pub fn validate_model(caps: ModelCapabilities) -> Result<(), String> {
    if !caps.supports_tool_calling {
        return Err("model does not support tool calling".into());
    }
    if caps.max_context_tokens < MIN_CONTEXT_TOKENS {
        return Err(format!(
            "model context length {} is below the minimum of {MIN_CONTEXT_TOKENS} tokens",
            caps.max_context_tokens
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("no script rule matches (step {step}): {input:?}")]
    NoMatchingRule { step: usize, input: String },
    #[error("script error in rule {rule}: {reason}")]
    Script { rule: String, reason: String },
    #[error("model backend unavailable after {attempts} attempts: {last}")]
    BackendUnavailable { attempts: u32, last: String },
    #[error("model backend rejected credentials: {0}")]
    AuthError(String),
    #[error("could not map provider response: {0}")]
    ResponseMappingError(String),
}

pub trait ModelBackend: Send {
    fn name(&self) -> &str;
    fn capabilities(&self) -> ModelCapabilities;
    fn complete(&mut self, request: &ModelRequest) -> Result<ModelResponse, ModelError>;
}

impl<B: ModelBackend + ?Sized> ModelBackend for Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn capabilities(&self) -> ModelCapabilities {
        (**self).capabilities()
    }

    fn complete(&mut self, request: &ModelRequest) -> Result<ModelResponse, ModelError> {
        (**self).complete(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caps(tools: bool, ctx: usize) -> ModelCapabilities {
        ModelCapabilities {
            supports_tool_calling: tools,
            max_context_tokens: ctx,
        }
    }

    #[test]
    fn capability_boundary() {
        assert!(validate_model(caps(true, 8192)).is_ok());
        assert!(validate_model(caps(true, 8191)).unwrap_err().contains("context length"));
        assert!(validate_model(caps(false, 128_000)).unwrap_err().contains("tool calling"));
        assert!(validate_model(caps(false, usize::MAX)).is_err());
    }
}
