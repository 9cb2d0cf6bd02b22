//! Tool-call wire format.
//!
//! A model turns into tool calls by answering with a JSON object:
//!
//! ```text
//! {"reasoning":"...","tool_calls":[{"id":"c1","group":0,"name":"node_list","args":{}}]}
//! ```
//!
//! `group` defaults to 0 and `args` to `{}`. Calls sharing a group run
//! concurrently; groups run in ascending order. Anything without a
//! `tool_calls` key is a final answer. Observations go back as role=tool
//! messages holding `{"id":..,"result":..}` or `{"id":..,"error":..}`.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::toolkit::canonical_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    #[serde(default)]
    pub group: u32,
    pub name: String,
    #[serde(default = "empty_args")]
    pub args: Value,
}

fn empty_args() -> Value {
    Value::Object(Default::default())
}

impl ToolCall {
    pub fn new(id: impl Into<String>, group: u32, name: impl Into<String>, args: Value) -> Self {
        Self {
            id: id.into(),
            group,
            name: name.into(),
            args,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolCallBatch {
    pub reasoning: Option<String>,
    /// Parallel groups in execution order; never empty.
    pub groups: Vec<Vec<ToolCall>>,
}

impl ToolCallBatch {
    pub fn calls(&self) -> impl Iterator<Item = &ToolCall> {
        self.groups.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Group the calls by their `group` field, keeping record order inside
    /// each group.
    pub fn from_calls(reasoning: Option<String>, calls: Vec<ToolCall>) -> Result<Self, String> {
        if calls.is_empty() {
            return Err("tool_calls is empty".into());
        }
        let mut seen = HashSet::new();
        for c in &calls {
            if !seen.insert(c.id.as_str()) {
                return Err(format!("duplicate tool call id {:?}", c.id));
            }
            if !c.args.is_object() {
                return Err(format!("args of call {:?} must be an object", c.id));
            }
        }
        let mut groups: BTreeMap<u32, Vec<ToolCall>> = BTreeMap::new();
        for c in calls {
            groups.entry(c.group).or_default().push(c);
        }
        Ok(Self {
            reasoning,
            groups: groups.into_values().collect(),
        })
    }

    /// Canonical wire text, as stored in the assistant message.
    pub fn to_wire(&self) -> String {
        let mut obj = json!({ "tool_calls": self.calls().collect::<Vec<_>>() });
        if let Some(r) = &self.reasoning {
            obj["reasoning"] = Value::String(r.clone());
        }
        canonical_json(&obj)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelOutput {
    FinalAnswer(String),
    Batch(ToolCallBatch),
    Malformed(String),
}

#[derive(Deserialize)]
struct Wire {
    #[serde(default)]
    reasoning: Option<String>,
    tool_calls: Vec<ToolCall>,
}

pub fn parse_model_output(raw: &str) -> ModelOutput {
    let trimmed = raw.trim();
    if !trimmed.starts_with('{') {
        return ModelOutput::FinalAnswer(raw.to_string());
    }
    let value: Value = match serde_json::from_str(trimmed) {
        Ok(v) => v,
        Err(e) => {
            return ModelOutput::Malformed(format!(
                "invalid JSON at line {} column {}: {e}",
                e.line(),
                e.column()
            ))
        }
    };
    if value.get("tool_calls").is_none() {
        return ModelOutput::FinalAnswer(raw.to_string());
    }
    let wire: Wire = match serde_json::from_value(value) {
        Ok(w) => w,
        Err(e) => return ModelOutput::Malformed(format!("invalid tool call record: {e}")),
    };
    match ToolCallBatch::from_calls(wire.reasoning, wire.tool_calls) {
        Ok(batch) => ModelOutput::Batch(batch),
        Err(e) => ModelOutput::Malformed(e),
    }
}

/// Content of the role=tool message for one observation.
pub fn observation_content(id: &str, outcome: Result<&Value, &str>) -> String {
    match outcome {
        Ok(result) => canonical_json(&json!({"id": id, "result": result})),
        Err(error) => canonical_json(&json!({"id": id, "error": error})),
    }
}
