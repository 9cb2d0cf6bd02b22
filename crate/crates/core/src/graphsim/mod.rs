//! Deterministic in-process pub/sub middleware.
//!
//! A [`Graph`] holds nodes, topics, services, a parameter store and a log,
//! all behind one reentrant guard. Time is a logical tick counter: every
//! publish, service call and log entry advances it by one, so identical
//! operation sequences replay to identical state.
//!
//! Subscriber callbacks run synchronously inside [`Graph::publish`], in
//! subscription order, while the guard is held. A callback may publish to
//! other topics; publishing back onto the topic currently being delivered is
//! rejected with [`GraphError::Reentrancy`].

mod log;
mod names;
mod params;

use std::cell::RefCell;
use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use indexmap::IndexMap;
use parking_lot::ReentrantMutex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use self::log::{format_log_line, parse_log_line, LogEntry, LogLevel};
pub use self::names::{is_valid_name, validate_name};
pub use self::params::{ParamOp, ParamReply, ParamValue};

/// Logical time.
pub type Tick = u64;

/// Structured message body used for topics and services.
pub type Payload = serde_json::Map<String, Value>;

/// Default number of payloads a topic retains.
pub const DEFAULT_RING_DEPTH: usize = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("node {0} is already registered")]
    DuplicateNode(String),
    #[error("invalid name {0:?}: expected '/'-separated segments of [A-Za-z0-9_]")]
    InvalidName(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("unknown topic {0}")]
    UnknownTopic(String),
    #[error("node {node} does not publish {topic}")]
    NotAPublisher { node: String, topic: String },
    #[error("topic {topic} has type {existing}, declared as {declared}")]
    TopicTypeMismatch {
        topic: String,
        existing: String,
        declared: String,
    },
    #[error("unknown service {0}")]
    UnknownService(String),
    #[error("service {0} already has a provider")]
    DuplicateService(String),
    #[error("service {service}: field {field:?} {reason}")]
    SchemaViolation {
        service: String,
        field: String,
        reason: String,
    },
    #[error("unknown parameter key {0}")]
    UnknownKey(String),
    #[error("parameter request is missing its {0}")]
    MissingArgument(&'static str),
    #[error("bad log level {0:?}")]
    BadLevel(String),
    #[error("re-entrant publish on {0} from inside its own subscriber callback")]
    Reentrancy(String),
    #[error("log mirror: {0}")]
    Io(String),
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

/// Semantic type of one service request field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldType {
    Bool,
    Integer,
    Number,
    Text,
    List,
    Map,
}

impl FieldType {
    pub fn accepts(self, value: &Value) -> bool {
        match self {
            FieldType::Bool => value.is_boolean(),
            FieldType::Integer => value.is_i64() || value.is_u64(),
            FieldType::Number => value.is_number(),
            FieldType::Text => value.is_string(),
            FieldType::List => value.is_array(),
            FieldType::Map => value.is_object(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FieldType::Bool => "bool",
            FieldType::Integer => "integer",
            FieldType::Number => "number",
            FieldType::Text => "text",
            FieldType::List => "list",
            FieldType::Map => "map",
        }
    }
}

/// What a subscriber callback receives.
#[derive(Debug, Clone)]
pub struct Delivery<'a> {
    pub topic: &'a str,
    pub tick: Tick,
    pub payload: &'a Payload,
}

pub type SubscriberFn = Arc<dyn Fn(&Delivery<'_>) + Send + Sync>;
pub type ServiceHandler = Arc<dyn Fn(&Payload) -> Payload + Send + Sync>;

struct SubscriptionDecl {
    topic: String,
    message_type: String,
    callback: Option<SubscriberFn>,
}

struct ServiceDecl {
    name: String,
    request_schema: IndexMap<String, FieldType>,
    handler: ServiceHandler,
}

/// Declaration of a node to register, built fluently.
pub struct NodeSpec {
    name: String,
    publications: Vec<(String, String)>,
    subscriptions: Vec<SubscriptionDecl>,
    services: Vec<ServiceDecl>,
}

impl NodeSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            publications: Vec::new(),
            subscriptions: Vec::new(),
            services: Vec::new(),
        }
    }

    pub fn publishes(mut self, topic: impl Into<String>, message_type: impl Into<String>) -> Self {
        self.publications.push((topic.into(), message_type.into()));
        self
    }

    /// Subscribe without a callback (visible to introspection only).
    pub fn subscribes(mut self, topic: impl Into<String>, message_type: impl Into<String>) -> Self {
        self.subscriptions.push(SubscriptionDecl {
            topic: topic.into(),
            message_type: message_type.into(),
            callback: None,
        });
        self
    }

    pub fn on<F>(mut self, topic: impl Into<String>, message_type: impl Into<String>, callback: F) -> Self
    where
        F: Fn(&Delivery<'_>) + Send + Sync + 'static,
    {
        self.subscriptions.push(SubscriptionDecl {
            topic: topic.into(),
            message_type: message_type.into(),
            callback: Some(Arc::new(callback)),
        });
        self
    }

    pub fn provides<F>(
        mut self,
        service: impl Into<String>,
        request_schema: impl IntoIterator<Item = (String, FieldType)>,
        handler: F,
    ) -> Self
    where
        F: Fn(&Payload) -> Payload + Send + Sync + 'static,
    {
        self.services.push(ServiceDecl {
            name: service.into(),
            request_schema: request_schema.into_iter().collect(),
            handler: Arc::new(handler),
        });
        self
    }
}

/// Cheap reference to a registered node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeHandle {
    name: String,
}

impl NodeHandle {
    pub fn name(&self) -> &str {
        &self.name
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeRecord {
    pub name: String,
    pub publications: Vec<String>,
    pub subscriptions: Vec<String>,
    pub provided_services: Vec<String>,
}

/// A buffered payload with the tick at which it was published.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stamped {
    pub tick: Tick,
    pub payload: Payload,
}

pub struct TopicRecord {
    pub name: String,
    pub message_type: String,
    pub buffer: VecDeque<Stamped>,
    pub publish_count: u64,
    pub publishers: Vec<String>,
    subscribers: Vec<(String, Option<SubscriberFn>)>,
}

impl TopicRecord {
    pub fn subscriber_names(&self) -> impl Iterator<Item = &str> {
        self.subscribers.iter().map(|(n, _)| n.as_str())
    }
}

impl fmt::Debug for TopicRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TopicRecord")
            .field("name", &self.name)
            .field("message_type", &self.message_type)
            .field("buffered", &self.buffer.len())
            .field("publish_count", &self.publish_count)
            .field("publishers", &self.publishers)
            .field("subscribers", &self.subscriber_names().collect::<Vec<_>>())
            .finish()
    }
}

pub struct ServiceRecord {
    pub name: String,
    pub provider: String,
    pub request_schema: IndexMap<String, FieldType>,
    pub call_count: u64,
    handler: ServiceHandler,
}

impl fmt::Debug for ServiceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ServiceRecord")
            .field("name", &self.name)
            .field("provider", &self.provider)
            .field("request_schema", &self.request_schema)
            .field("call_count", &self.call_count)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct GraphConfig {
    pub ring_depth: usize,
    /// File every log entry is mirrored to. Truncated when the graph is created.
    pub log_file: Option<PathBuf>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            ring_depth: DEFAULT_RING_DEPTH,
            log_file: None,
        }
    }
}

/// The full middleware state. Only reachable through [`Graph`].
#[derive(Debug)]
pub struct GraphState {
    pub nodes: IndexMap<String, NodeRecord>,
    pub topics: IndexMap<String, TopicRecord>,
    pub services: IndexMap<String, ServiceRecord>,
    pub params: BTreeMap<String, ParamValue>,
    pub logs: Vec<LogEntry>,
    pub clock: Tick,
    config: GraphConfig,
    delivering: HashSet<String>,
}

impl GraphState {
    fn tick(&mut self) -> Tick {
        self.clock += 1;
        self.clock
    }
}

/// Immutable copy of the graph's introspectable surface.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GraphSnapshot {
    pub nodes: Vec<String>,
    /// (name, message type)
    pub topics: Vec<(String, String)>,
    pub services: Vec<String>,
    pub params: Vec<String>,
}

/// Shared handle to one simulated middleware graph.
#[derive(Clone)]
pub struct Graph {
    inner: Arc<ReentrantMutex<RefCell<GraphState>>>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let guard = self.inner.lock();
        let state = guard.borrow();
        f.debug_struct("Graph")
            .field("nodes", &state.nodes.len())
            .field("topics", &state.topics.len())
            .field("clock", &state.clock)
            .finish()
    }
}

impl Default for Graph {
    fn default() -> Self {
        Self::new(GraphConfig::default()).expect("no log mirror configured")
    }
}

impl Graph {
    pub fn new(config: GraphConfig) -> Result<Self> {
        if let Some(path) = &config.log_file {
            log::truncate_mirror(path)?;
        }
        let state = GraphState {
            nodes: IndexMap::new(),
            topics: IndexMap::new(),
            services: IndexMap::new(),
            params: BTreeMap::new(),
            logs: Vec::new(),
            clock: 0,
            config,
            delivering: HashSet::new(),
        };
        Ok(Self {
            inner: Arc::new(ReentrantMutex::new(RefCell::new(state))),
        })
    }

    /// Run `f` while holding the graph guard. No other thread can mutate the
    /// graph until `f` returns; the current thread may keep calling graph
    /// methods from inside.
    pub fn atomically<R>(&self, f: impl FnOnce() -> R) -> R {
        let _guard = self.inner.lock();
        f()
    }

    fn with<R>(&self, f: impl FnOnce(&mut GraphState) -> R) -> R {
        let guard = self.inner.lock();
        let mut state = guard.borrow_mut();
        f(&mut state)
    }

    pub fn now(&self) -> Tick {
        self.with(|s| s.clock)
    }

    /// Advance the clock by `n` ticks without any other effect.
    pub fn advance(&self, n: u64) -> Tick {
        self.with(|s| {
            s.clock += n;
            s.clock
        })
    }

    pub fn ring_depth(&self) -> usize {
        self.with(|s| s.config.ring_depth)
    }

    pub fn log_file(&self) -> Option<PathBuf> {
        self.with(|s| s.config.log_file.clone())
    }

    pub fn register_node(&self, spec: NodeSpec) -> Result<NodeHandle> {
        self.with(|s| {
            validate_name(&spec.name)?;
            if s.nodes.contains_key(&spec.name) {
                return Err(GraphError::DuplicateNode(spec.name.clone()));
            }
            // Validate everything before touching state so a failed
            // registration leaves the graph unchanged.
            let mut declared: BTreeMap<&str, &str> = BTreeMap::new();
            let decls = spec
                .publications
                .iter()
                .map(|(t, ty)| (t.as_str(), ty.as_str()))
                .chain(spec.subscriptions.iter().map(|d| (d.topic.as_str(), d.message_type.as_str())));
            for (topic, ty) in decls {
                validate_name(topic)?;
                let existing = s
                    .topics
                    .get(topic)
                    .map(|t| t.message_type.as_str())
                    .or_else(|| declared.get(topic).copied());
                match existing {
                    Some(e) if e != ty => {
                        return Err(GraphError::TopicTypeMismatch {
                            topic: topic.to_string(),
                            existing: e.to_string(),
                            declared: ty.to_string(),
                        })
                    }
                    _ => {
                        declared.insert(topic, ty);
                    }
                }
            }
            let mut seen_services = HashSet::new();
            for svc in &spec.services {
                validate_name(&svc.name)?;
                if s.services.contains_key(&svc.name) || !seen_services.insert(svc.name.as_str()) {
                    return Err(GraphError::DuplicateService(svc.name.clone()));
                }
            }

            let mut record = NodeRecord {
                name: spec.name.clone(),
                publications: Vec::new(),
                subscriptions: Vec::new(),
                provided_services: Vec::new(),
            };
            for (topic, ty) in spec.publications {
                let t = s.topics.entry(topic.clone()).or_insert_with(|| new_topic(&topic, &ty));
                if !t.publishers.contains(&spec.name) {
                    t.publishers.push(spec.name.clone());
                }
                if !record.publications.contains(&topic) {
                    record.publications.push(topic);
                }
            }
            for sub in spec.subscriptions {
                let t = s
                    .topics
                    .entry(sub.topic.clone())
                    .or_insert_with(|| new_topic(&sub.topic, &sub.message_type));
                t.subscribers.push((spec.name.clone(), sub.callback));
                if !record.subscriptions.contains(&sub.topic) {
                    record.subscriptions.push(sub.topic);
                }
            }
            for svc in spec.services {
                record.provided_services.push(svc.name.clone());
                s.services.insert(
                    svc.name.clone(),
                    ServiceRecord {
                        name: svc.name,
                        provider: spec.name.clone(),
                        request_schema: svc.request_schema,
                        call_count: 0,
                        handler: svc.handler,
                    },
                );
            }
            s.nodes.insert(spec.name.clone(), record);
            Ok(NodeHandle { name: spec.name })
        })
    }

    pub fn node(&self, name: &str) -> Result<NodeHandle> {
        self.with(|s| {
            s.nodes
                .get(name)
                .map(|n| NodeHandle { name: n.name.clone() })
                .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
        })
    }

    /// Publish `payload` on `topic` from `node`. Every subscriber callback
    /// has run exactly once when this returns. Returns the publish tick.
    pub fn publish(&self, node: &NodeHandle, topic: &str, payload: Payload) -> Result<Tick> {
        let guard = self.inner.lock();
        let (tick, callbacks) = {
            let mut s = guard.borrow_mut();
            if s.delivering.contains(topic) {
                return Err(GraphError::Reentrancy(topic.to_string()));
            }
            let ring = s.config.ring_depth;
            let t = s
                .topics
                .get(topic)
                .ok_or_else(|| GraphError::UnknownTopic(topic.to_string()))?;
            if !t.publishers.iter().any(|p| p == node.name()) {
                return Err(GraphError::NotAPublisher {
                    node: node.name.clone(),
                    topic: topic.to_string(),
                });
            }
            let tick = s.tick();
            let t = s.topics.get_mut(topic).expect("checked above");
            t.publish_count += 1;
            if ring == 0 {
                t.buffer.clear();
            } else {
                while t.buffer.len() >= ring {
                    t.buffer.pop_front();
                }
                t.buffer.push_back(Stamped {
                    tick,
                    payload: payload.clone(),
                });
            }
            let callbacks: Vec<SubscriberFn> = t.subscribers.iter().filter_map(|(_, cb)| cb.clone()).collect();
            s.delivering.insert(topic.to_string());
            (tick, callbacks)
        };
        let delivery = Delivery {
            topic,
            tick,
            payload: &payload,
        };
        for cb in &callbacks {
            cb(&delivery);
        }
        guard.borrow_mut().delivering.remove(topic);
        Ok(tick)
    }

    /// Call a service synchronously. The handler runs with the guard held.
    pub fn call_service(&self, service: &str, request: &Payload) -> Result<Payload> {
        let guard = self.inner.lock();
        let handler = {
            let mut s = guard.borrow_mut();
            let svc = s
                .services
                .get(service)
                .ok_or_else(|| GraphError::UnknownService(service.to_string()))?;
            check_request(service, &svc.request_schema, request)?;
            s.tick();
            let svc = s.services.get_mut(service).expect("checked above");
            svc.call_count += 1;
            svc.handler.clone()
        };
        Ok(handler(request))
    }

    pub fn service_call_count(&self, service: &str) -> Result<u64> {
        self.with(|s| {
            s.services
                .get(service)
                .map(|svc| svc.call_count)
                .ok_or_else(|| GraphError::UnknownService(service.to_string()))
        })
    }

    pub fn service_schema(&self, service: &str) -> Result<IndexMap<String, FieldType>> {
        self.with(|s| {
            s.services
                .get(service)
                .map(|svc| svc.request_schema.clone())
                .ok_or_else(|| GraphError::UnknownService(service.to_string()))
        })
    }

    pub fn param_access(&self, op: ParamOp) -> Result<ParamReply> {
        self.with(|s| params::apply(&mut s.params, op))
    }

    pub fn set_param(&self, key: impl Into<String>, value: ParamValue) {
        self.with(|s| {
            s.params.insert(key.into(), value);
        })
    }

    pub fn get_param(&self, key: &str) -> Result<ParamValue> {
        self.with(|s| {
            s.params
                .get(key)
                .cloned()
                .ok_or_else(|| GraphError::UnknownKey(key.to_string()))
        })
    }

    pub fn snapshot(&self) -> GraphSnapshot {
        self.with(|s| GraphSnapshot {
            nodes: s.nodes.keys().cloned().collect(),
            topics: s
                .topics
                .values()
                .map(|t| (t.name.clone(), t.message_type.clone()))
                .collect(),
            services: s.services.keys().cloned().collect(),
            params: s.params.keys().cloned().collect(),
        })
    }

    pub fn node_record(&self, name: &str) -> Result<NodeRecord> {
        self.with(|s| {
            s.nodes
                .get(name)
                .cloned()
                .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
        })
    }

    /// Buffered payloads of `topic`, oldest first.
    pub fn topic_buffer(&self, topic: &str) -> Result<Vec<Stamped>> {
        self.with(|s| {
            s.topics
                .get(topic)
                .map(|t| t.buffer.iter().cloned().collect())
                .ok_or_else(|| GraphError::UnknownTopic(topic.to_string()))
        })
    }

    pub fn publish_count(&self, topic: &str) -> Result<u64> {
        self.with(|s| {
            s.topics
                .get(topic)
                .map(|t| t.publish_count)
                .ok_or_else(|| GraphError::UnknownTopic(topic.to_string()))
        })
    }

    pub fn topic_type(&self, topic: &str) -> Result<String> {
        self.with(|s| {
            s.topics
                .get(topic)
                .map(|t| t.message_type.clone())
                .ok_or_else(|| GraphError::UnknownTopic(topic.to_string()))
        })
    }

    /// Append a log entry; mirrored to the configured log file.
    pub fn log(&self, node: &str, level: &str, text: &str) -> Result<Tick> {
        let level: LogLevel = level.parse()?;
        self.log_entry(node, level, text)
    }

    pub fn log_entry(&self, node: &str, level: LogLevel, text: &str) -> Result<Tick> {
        self.with(|s| {
            if !s.nodes.contains_key(node) {
                return Err(GraphError::UnknownNode(node.to_string()));
            }
            let entry = LogEntry {
                tick: s.clock + 1,
                level,
                node: node.to_string(),
                text: log::single_line(text),
            };
            if let Some(path) = &s.config.log_file {
                log::append_mirror(path, &entry)?;
            }
            let tick = s.tick();
            s.logs.push(entry);
            Ok(tick)
        })
    }

    /// Log entries, optionally restricted to one level.
    pub fn logs(&self, level: Option<LogLevel>) -> Vec<LogEntry> {
        self.with(|s| {
            s.logs
                .iter()
                .filter(|e| level.is_none_or(|l| e.level == l))
                .cloned()
                .collect()
        })
    }
}

fn new_topic(name: &str, message_type: &str) -> TopicRecord {
    TopicRecord {
        name: name.to_string(),
        message_type: message_type.to_string(),
        buffer: VecDeque::new(),
        publish_count: 0,
        publishers: Vec::new(),
        subscribers: Vec::new(),
    }
}

fn check_request(service: &str, schema: &IndexMap<String, FieldType>, request: &Payload) -> Result<()> {
    for (field, ty) in schema {
        match request.get(field) {
            None => {
                return Err(GraphError::SchemaViolation {
                    service: service.to_string(),
                    field: field.clone(),
                    reason: "is missing".into(),
                })
            }
            Some(v) if !ty.accepts(v) => {
                return Err(GraphError::SchemaViolation {
                    service: service.to_string(),
                    field: field.clone(),
                    reason: format!("must be {}", ty.as_str()),
                })
            }
            Some(_) => {}
        }
    }
    if let Some(extra) = request.keys().find(|k| !schema.contains_key(*k)) {
        return Err(GraphError::SchemaViolation {
            service: service.to_string(),
            field: extra.clone(),
            reason: "is not part of the request schema".into(),
        });
    }
    Ok(())
}
