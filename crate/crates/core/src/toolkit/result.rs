use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::graphsim::Payload;

/// Canonical JSON: object keys sorted lexicographically (by bytes), no
/// insignificant whitespace, numbers in shortest round-trip form.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Null | Value::Bool(_) | Value::Number(_) | Value::String(_) => {
            // serde_json renders scalars canonically (ryu for floats).
            write!(out, "{value}").expect("writing to a String");
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{}", Value::String(key.clone())).expect("writing to a String");
                out.push(':');
                write_canonical(&map[key], out);
            }
            out.push('}');
        }
    }
}

/// Structured tool output plus the exact text the model sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub payload: Payload,
    pub rendered_text: String,
}

impl ToolResult {
    pub fn new(payload: Payload) -> Self {
        let rendered_text = canonical_json(&Value::Object(payload.clone()));
        Self { payload, rendered_text }
    }

    /// Wraps a scalar return value as `{"value": ...}`.
    pub fn value(value: impl Into<Value>) -> Self {
        let mut payload = Payload::new();
        payload.insert("value".into(), value.into());
        Self::new(payload)
    }
}
