use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{GraphError, Result};

/// A parameter value: scalar or string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn from_json(value: &Value) -> Option<Self> {
        match value {
            Value::Bool(b) => Some(ParamValue::Bool(*b)),
            Value::Number(n) => n
                .as_i64()
                .map(ParamValue::Int)
                .or_else(|| n.as_f64().map(ParamValue::Float)),
            Value::String(s) => Some(ParamValue::Str(s.clone())),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            ParamValue::Bool(b) => Value::Bool(*b),
            ParamValue::Int(i) => Value::from(*i),
            ParamValue::Float(f) => Value::from(*f),
            ParamValue::Str(s) => Value::String(s.clone()),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Str(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamOp {
    Get { key: Option<String> },
    Set { key: Option<String>, value: Option<ParamValue> },
    List,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamReply {
    Value(ParamValue),
    Set { key: String, value: ParamValue },
    Keys(Vec<String>),
}

pub(super) fn apply(store: &mut BTreeMap<String, ParamValue>, op: ParamOp) -> Result<ParamReply> {
    match op {
        ParamOp::Get { key } => {
            let key = key.ok_or(GraphError::MissingArgument("key"))?;
            store
                .get(&key)
                .cloned()
                .map(ParamReply::Value)
                .ok_or(GraphError::UnknownKey(key))
        }
        ParamOp::Set { key, value } => {
            let key = key.ok_or(GraphError::MissingArgument("key"))?;
            let value = value.ok_or(GraphError::MissingArgument("value"))?;
            store.insert(key.clone(), value.clone());
            Ok(ParamReply::Set { key, value })
        }
        // BTreeMap iteration is already lexicographic.
        ParamOp::List => Ok(ParamReply::Keys(store.keys().cloned().collect())),
    }
}
