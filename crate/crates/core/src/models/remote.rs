//! Chat-completions style HTTP backend.
//!
//! Request body: `{"model":..,"messages":[{"role":..,"content":..}],"tools":[<catalog entries>]}`
//! with a bearer credential from [`API_KEY_ENV`]. The reply may be either
//! `{"choices":[{"message":{"content":..,"tool_calls":[..]}}]}` with
//! function-style calls (`{"id","function":{"name","arguments"}}`, arguments
//! as a JSON string or object), or `{"content":".."}` already in the runtime
//! wire format. Provider tool calls all land in one parallel group; the
//! message content becomes the batch reasoning.

use std::time::Duration;

use serde_json::{json, Value};

use crate::agent::{ToolCall, ToolCallBatch};

use super::{ModelBackend, ModelCapabilities, ModelError, ModelRequest, ModelResponse};

pub const API_KEY_ENV: &str = "ROSA_MODEL_API_KEY";

/// Delays between attempts. One retry per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub delays: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            delays: vec![
                Duration::from_millis(500),
                Duration::from_secs(1),
                Duration::from_secs(2),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    pub retry: RetryPolicy,
    pub timeout: Duration,
    pub capabilities: ModelCapabilities,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(60),
            capabilities: ModelCapabilities {
                supports_tool_calling: true,
                max_context_tokens: 128_000,
            },
        }
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    /// Read once at construction; `None` fails every request up front.
    api_key: Option<String>,
    client: Option<reqwest::blocking::Client>,
    requests_sent: u32,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("config", &self.config)
            .field("has_key", &self.api_key.is_some())
            .finish()
    }
}

enum Attempt {
    Transient(String),
    Fatal(ModelError),
}

impl RemoteBackend {
    /// Reads the credential from the environment.
    pub fn new(config: RemoteConfig) -> Self {
        let key = std::env::var(API_KEY_ENV).ok();
        Self::with_key(config, key)
    }

    pub fn with_key(config: RemoteConfig, api_key: Option<String>) -> Self {
        Self {
            config,
            api_key: api_key.filter(|k| !k.trim().is_empty()),
            client: None,
            requests_sent: 0,
        }
    }

    pub fn requests_sent(&self) -> u32 {
        self.requests_sent
    }

    pub fn request_body(&self, request: &ModelRequest) -> Value {
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| json!({"role": m.role.as_str(), "content": m.content}))
            .collect();
        json!({
            "model": self.config.model,
            "messages": messages,
            "tools": request.tools,
        })
    }

    fn attempt(&mut self, key: &str, body: &Value) -> Result<String, Attempt> {
        let timeout = self.config.timeout;
        let client = match &self.client {
            Some(c) => c.clone(),
            None => {
                let c = reqwest::blocking::Client::builder()
                    .timeout(timeout)
                    .build()
                    .map_err(|e| Attempt::Fatal(ModelError::BackendUnavailable { attempts: 0, last: e.to_string() }))?;
                self.client = Some(c.clone());
                c
            }
        };
        self.requests_sent += 1;
        let resp = client
            .post(&self.config.endpoint)
            .bearer_auth(key)
            .json(body)
            .send()
            .map_err(|e| Attempt::Transient(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Attempt::Transient(e.to_string()))?;
        if status == 401 || status == 403 {
            return Err(Attempt::Fatal(ModelError::AuthError(format!("HTTP {status}"))));
        }
        if status == 429 || status.is_server_error() {
            return Err(Attempt::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(ModelError::BackendUnavailable {
                attempts: 1,
                last: format!("HTTP {status}: {text}"),
            }));
        }
        let reply: Value =
            serde_json::from_str(&text).map_err(|e| Attempt::Fatal(ModelError::ResponseMappingError(e.to_string())))?;
        map_reply(&reply).map_err(|e| Attempt::Fatal(ModelError::ResponseMappingError(e)))
    }
}

/// Convert a provider reply into runtime content text.
pub fn map_reply(reply: &Value) -> Result<String, String> {
    if let Some(content) = reply.get("content").and_then(Value::as_str) {
        return non_empty(content.to_string());
    }
    let message = reply
        .pointer("/choices/0/message")
        .ok_or("reply has neither choices[0].message nor content")?;
    let content = message.get("content").and_then(Value::as_str).unwrap_or_default();
    let calls = match message.get("tool_calls") {
        None | Some(Value::Null) => return non_empty(content.to_string()),
        Some(Value::Array(calls)) if calls.is_empty() => return non_empty(content.to_string()),
        Some(Value::Array(calls)) => calls,
        Some(_) => return Err("tool_calls is not a list".into()),
    };
    let mut out = Vec::with_capacity(calls.len());
    for (i, c) in calls.iter().enumerate() {
        let id = c
            .get("id")
            .and_then(Value::as_str)
            .map_or_else(|| format!("call_{i}"), str::to_string);
        let f = c.get("function").unwrap_or(c);
        let name = f
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| format!("tool call {id} has no name"))?;
        let args = match f.get("arguments").or_else(|| f.get("args")) {
            None | Some(Value::Null) => json!({}),
            Some(Value::String(s)) if s.trim().is_empty() => json!({}),
            Some(Value::String(s)) => serde_json::from_str(s).map_err(|e| format!("arguments of {id}: {e}"))?,
            Some(v) => v.clone(),
        };
        out.push(ToolCall::new(id, 0, name, args));
    }
    let reasoning = (!content.trim().is_empty()).then(|| content.to_string());
    ToolCallBatch::from_calls(reasoning, out).map(|b| b.to_wire())
}

fn non_empty(s: String) -> Result<String, String> {
    if s.trim().is_empty() {
        Err("reply is empty".into())
    } else {
        Ok(s)
    }
}

impl ModelBackend for RemoteBackend {
    fn name(&self) -> &str {
        &self.config.model
    }

    fn capabilities(&self) -> ModelCapabilities {
        self.config.capabilities
    }

    fn complete(&mut self, request: &ModelRequest) -> Result<ModelResponse, ModelError> {
        let key = self
            .api_key
            .clone()
            .ok_or_else(|| ModelError::AuthError(format!("{API_KEY_ENV} is not set")))?;
        let body = self.request_body(request);
        let delays = self.config.retry.delays.clone();
        let mut attempts = 0;
        let mut last;
        loop {
            attempts += 1;
            match self.attempt(&key, &body) {
                Ok(content) => return Ok(ModelResponse { content }),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient(msg)) => last = msg,
            }
            match delays.get(attempts as usize - 1) {
                Some(d) => std::thread::sleep(*d),
                None => return Err(ModelError::BackendUnavailable { attempts, last }),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_backoff() {
        let d: Vec<f64> = RetryPolicy::default().delays.iter().map(Duration::as_secs_f64).collect();
        assert_eq!(d, [0.5, 1.0, 2.0]);
    }

    #[test]
    fn maps_provider_tool_calls_into_one_group() {
        let reply = json!({"choices": [{"message": {
            "content": "Checking nodes.",
            "tool_calls": [{"id": "x1", "type": "function",
                            "function": {"name": "node_list", "arguments": "{\"namespace\":\"/\"}"}}]
        }}]});
        assert_eq!(
            map_reply(&reply).unwrap(),
            r#"{"reasoning":"Checking nodes.","tool_calls":[{"args":{"namespace":"/"},"group":0,"id":"x1","name":"node_list"}]}"#
        );
    }

    #[test]
    fn maps_plain_content_and_rejects_junk() {
        let reply = json!({"choices": [{"message": {"content": "Hello."}}]});
        assert_eq!(map_reply(&reply).unwrap(), "Hello.");
        assert!(map_reply(&json!({"choices": []})).is_err());
        assert!(map_reply(&json!({"choices": [{"message": {"content": ""}}]})).is_err());
        let bad_args = json!({"choices": [{"message": {"tool_calls": [{"function": {"name": "a", "arguments": "{"}}]}}]});
        assert!(map_reply(&bad_args).is_err());
    }

    #[test]
    fn missing_credential_fails_before_any_request() {
        let mut b = RemoteBackend::with_key(RemoteConfig::new("http://127.0.0.1:9", "m"), None);
        let req = ModelRequest {
            messages: vec![],
            tools: vec![],
        };
        assert!(matches!(b.complete(&req), Err(ModelError::AuthError(_))));
        assert_eq!(b.requests_sent(), 0);
    }
}
