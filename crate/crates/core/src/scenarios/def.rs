use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::graphsim::{FieldType, Payload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotKind {
    Spot,
    Eels,
    Carter,
    RosDemo,
}

/// One scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDef {
    pub name: String,
    pub robot: RobotKind,
    pub system_prompts: Vec<String>,
    /// Enabled tools. Empty enables every built-in and robot tool.
    #[serde(default)]
    pub tools: Vec<String>,
    /// Global blacklist injected into every blacklist-aware tool.
    #[serde(default)]
    pub blacklist: Vec<String>,
    /// Name of a bundled rule script.
    #[serde(default)]
    pub script: Option<String>,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default)]
    pub graph: SeedGraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    pub heading_error_deg: f64,
    pub obstacle_distance_m: f64,
    pub fov_deg: f64,
    /// What `describe_camera` returns.
    pub description: String,
    /// Logical ticks each subsystem status query takes.
    pub status_delay_ticks: u64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            heading_error_deg: 0.3,
            obstacle_distance_m: 4.0,
            fov_deg: 90.0,
            description: String::new(),
            status_delay_ticks: 50,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedGraph {
    pub nodes: Vec<SeedNode>,
    pub params: BTreeMap<String, Value>,
    pub messages: Vec<SeedMessage>,
    pub logs: Vec<SeedLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedNode {
    pub name: String,
    #[serde(default)]
    pub publishes: Vec<TopicDecl>,
    #[serde(default)]
    pub subscribes: Vec<TopicDecl>,
    #[serde(default)]
    pub services: Vec<SeedService>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicDecl {
    pub topic: String,
    #[serde(rename = "type")]
    pub message_type: String,
}

/// A service that answers every valid request with a fixed response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedService {
    pub name: String,
    #[serde(default)]
    pub request: BTreeMap<String, FieldType>,
    #[serde(default)]
    pub response: Payload,
}

/// A message published once while seeding, so topics have history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedMessage {
    pub node: String,
    pub topic: String,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedLog {
    pub node: String,
    pub level: String,
    pub text: String,
}
