use std::str::FromStr;

use regex::Regex;
use serde_json::{json, Value};

use crate::graphsim::{Graph, ParamOp, ParamReply, ParamValue, Payload};
use crate::toolkit::{Blacklist, ToolError};

use super::obj;

/// Nodes filtered by namespace, then a whole-name regex, then the blacklist.
/// Payload keys: `nodes`, `total`, `namespace`, `pattern`.
pub fn node_list(
    graph: &Graph,
    pattern: Option<&str>,
    namespace: Option<&str>,
    blacklist: &Blacklist,
) -> Result<Payload, ToolError> {
    let pattern = pattern.unwrap_or(".*");
    let namespace = namespace.unwrap_or("/");
    let re = Regex::new(&format!("^(?:{pattern})$"))
        .map_err(|e| ToolError::failed(format!("BadPattern: {pattern:?} is not a valid regex ({e})")))?;
    let nodes: Vec<String> = graph
        .snapshot()
        .nodes
        .into_iter()
        .filter(|n| n.starts_with(namespace))
        .filter(|n| re.is_match(n))
        .filter(|n| !blacklist.matches(n))
        .collect();
    Ok(obj(json!({
        "nodes": nodes,
        "total": nodes.len(),
        "namespace": namespace,
        "pattern": pattern,
    })))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EchoMode {
    List,
    Echo,
}

impl FromStr for EchoMode {
    type Err = ToolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "list" => Ok(EchoMode::List),
            "echo" => Ok(EchoMode::Echo),
            other => Err(ToolError::failed(format!("mode must be \"list\" or \"echo\", got {other:?}"))),
        }
    }
}

pub fn topic_echo(
    graph: &Graph,
    mode: EchoMode,
    topic: Option<&str>,
    count: i64,
    blacklist: &Blacklist,
) -> Result<Payload, ToolError> {
    match mode {
        EchoMode::List => {
            let topics: Vec<Value> = graph
                .snapshot()
                .topics
                .into_iter()
                .filter(|(name, _)| !blacklist.matches(name))
                .map(|(name, ty)| json!({"name": name, "type": ty}))
                .collect();
            Ok(obj(json!({"total": topics.len(), "topics": topics})))
        }
        EchoMode::Echo => {
            let topic = topic.ok_or_else(|| ToolError::failed("echo mode requires a topic"))?;
            if count < 1 {
                return Err(ToolError::failed("count must be a positive integer"));
            }
            if blacklist.matches(topic) {
                return Err(ToolError::failed(format!("topic {topic} is blacklisted")));
            }
            let buffer = graph.topic_buffer(topic).map_err(|e| ToolError::failed(e.to_string()))?;
            let skip = buffer.len().saturating_sub(count as usize);
            let messages: Vec<Value> = buffer[skip..].iter().map(|s| Value::Object(s.payload.clone())).collect();
            Ok(obj(json!({"topic": topic, "total": messages.len(), "messages": messages})))
        }
    }
}

pub(super) fn service_call(graph: &Graph, service: &str, request: &Payload) -> Result<Payload, ToolError> {
    let response = graph
        .call_service(service, request)
        .map_err(|e| ToolError::failed(e.to_string()))?;
    Ok(obj(json!({"service": service, "response": response})))
}

pub(super) fn param_read(graph: &Graph, mode: &str, key: Option<&str>) -> Result<Payload, ToolError> {
    let op = match mode {
        "list" => ParamOp::List,
        "get" => ParamOp::Get { key: key.map(str::to_string) },
        other => return Err(ToolError::failed(format!("mode must be \"list\" or \"get\", got {other:?}"))),
    };
    match graph.param_access(op).map_err(|e| ToolError::failed(e.to_string()))? {
        ParamReply::Keys(keys) => Ok(obj(json!({"total": keys.len(), "keys": keys}))),
        ParamReply::Value(v) => Ok(obj(json!({"key": key, "value": v.to_json()}))),
        ParamReply::Set { .. } => unreachable!("read-only modes"),
    }
}

pub(super) fn param_set(graph: &Graph, key: String, raw: &str) -> Result<Payload, ToolError> {
    let value = serde_json::from_str::<Value>(raw)
        .ok()
        .and_then(|v| ParamValue::from_json(&v))
        .unwrap_or_else(|| ParamValue::Str(raw.to_string()));
    let op = ParamOp::Set {
        key: Some(key),
        value: Some(value),
    };
    match graph.param_access(op).map_err(|e| ToolError::failed(e.to_string()))? {
        ParamReply::Set { key, value } => Ok(obj(json!({"key": key, "value": value.to_json()}))),
        _ => unreachable!("set returns Set"),
    }
}
