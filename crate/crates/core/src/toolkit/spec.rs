use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Name of the parameter injected into tools that accept a blacklist.
pub const BLACKLIST_PARAM: &str = "blacklist";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Observation only.
    Downlink,
    /// Actuation; subject to the safety gate.
    Uplink,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Downlink => "downlink",
            Direction::Uplink => "uplink",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    String,
    Number,
    Integer,
    Boolean,
    StringList,
    NumberList,
    Object,
}

impl ParamType {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamType::String => "string",
            ParamType::Number => "number",
            ParamType::Integer => "integer",
            ParamType::Boolean => "boolean",
            ParamType::StringList => "string_list",
            ParamType::NumberList => "number_list",
            ParamType::Object => "object",
        }
    }

    /// Check `value`, coercing a numeric string into a number where the
    /// parameter is numeric. Returns the accepted value.
    pub fn coerce(self, value: &Value) -> Option<Value> {
        match (self, value) {
            (ParamType::String, Value::String(_))
            | (ParamType::Boolean, Value::Bool(_))
            | (ParamType::Object, Value::Object(_)) => Some(value.clone()),
            (ParamType::Number, Value::Number(_)) => Some(value.clone()),
            (ParamType::Number, Value::String(s)) => coerce_number(s),
            (ParamType::Integer, Value::Number(n)) if n.is_i64() || n.is_u64() => Some(value.clone()),
            (ParamType::Integer, Value::String(s)) => s.trim().parse::<i64>().ok().map(Value::from),
            (ParamType::StringList, Value::Array(items)) => {
                items.iter().all(Value::is_string).then(|| value.clone())
            }
            (ParamType::NumberList, Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Number(_) => Some(v.clone()),
                    Value::String(s) => coerce_number(s),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()
                .map(Value::Array),
            _ => None,
        }
    }
}

fn coerce_number(s: &str) -> Option<Value> {
    let s = s.trim();
    if let Ok(i) = s.parse::<i64>() {
        return Some(Value::from(i));
    }
    s.parse::<f64>()
        .ok()
        .filter(|f| f.is_finite())
        .and_then(|f| serde_json::Number::from_f64(f).map(Value::Number))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub default: Option<Value>,
    pub description: String,
}

/// Declarative description of a callable capability.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolSpec {
    pub name: String,
    /// The model-facing contract. Must not be empty.
    pub description: String,
    pub params: Vec<ParamSpec>,
    pub direction: Direction,
    pub accepts_blacklist: bool,
    /// Held for operator approval when the session requires confirmation.
    /// Only meaningful for uplink tools.
    pub confirmation_gated: bool,
}

impl ToolSpec {
    pub fn new(name: impl Into<String>, description: impl Into<String>, direction: Direction) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            params: Vec::new(),
            direction,
            accepts_blacklist: false,
            confirmation_gated: false,
        }
    }

    pub fn downlink(name: impl Into<String>, description: impl Into<String>) -> Self {
        Self::new(name, description, Direction::Downlink)
    }

    pub fn uplink(name: impl Into<String>, description: impl Into<String>) -> Self {
        Self::new(name, description, Direction::Uplink)
    }

    pub fn required(mut self, name: &str, ty: ParamType, description: &str) -> Self {
        self.params.push(ParamSpec {
            name: name.into(),
            ty,
            required: true,
            default: None,
            description: description.into(),
        });
        self
    }

    pub fn optional(mut self, name: &str, ty: ParamType, description: &str) -> Self {
        self.params.push(ParamSpec {
            name: name.into(),
            ty,
            required: false,
            default: None,
            description: description.into(),
        });
        self
    }

    pub fn with_default(mut self, name: &str, ty: ParamType, default: Value, description: &str) -> Self {
        self.params.push(ParamSpec {
            name: name.into(),
            ty,
            required: false,
            default: Some(default),
            description: description.into(),
        });
        self
    }

    /// Adds the optional `blacklist` list parameter.
    pub fn with_blacklist(mut self) -> Self {
        self.accepts_blacklist = true;
        self.optional(
            BLACKLIST_PARAM,
            ParamType::StringList,
            "Names to exclude from the output (exact names or trailing-* prefixes).",
        )
    }

    pub fn gated(mut self) -> Self {
        self.confirmation_gated = true;
        self
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Parameters with every required one before the optional ones,
    /// otherwise in declaration order.
    pub fn params_for_rendering(&self) -> impl Iterator<Item = &ParamSpec> {
        self.params
            .iter()
            .filter(|p| p.required)
            .chain(self.params.iter().filter(|p| !p.required))
    }

    pub fn is_uplink(&self) -> bool {
        self.direction == Direction::Uplink
    }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;

    #[test]
    fn numeric_strings_coerce_only_where_unambiguous() {
        assert_eq!(ParamType::Number.coerce(&json!("1.5")), Some(json!(1.5)));
        assert_eq!(ParamType::Number.coerce(&json!("3")), Some(json!(3)));
        assert_eq!(ParamType::Number.coerce(&json!("NaN")), None);
        assert_eq!(ParamType::Number.coerce(&json!("one")), None);
        assert_eq!(ParamType::Integer.coerce(&json!("7")), Some(json!(7)));
        assert_eq!(ParamType::Integer.coerce(&json!(7.5)), None);
        assert_eq!(ParamType::String.coerce(&json!(3)), None);
        assert_eq!(ParamType::NumberList.coerce(&json!([1, "2"])), Some(json!([1, 2])));
        assert_eq!(ParamType::StringList.coerce(&json!(["a", 1])), None);
    }

    #[test]
    fn required_params_render_first() {
        let spec = ToolSpec::downlink("t", "d")
            .optional("b", ParamType::String, "")
            .required("a", ParamType::String, "")
            .with_blacklist()
            .required("c", ParamType::Number, "");
        let order: Vec<_> = spec.params_for_rendering().map(|p| p.name.as_str()).collect();
        assert_eq!(order, ["a", "c", "b", "blacklist"]);
    }
}
