//! Demo robots bound to the simulated graph.
//!
//! A scenario file (TOML) names the robot kind, its system prompts, which
//! tools are enabled, a few constants and a seed graph:
//!
//! ```toml
//! name = "spot"
//! robot = "spot"                  # spot | eels | carter | ros_demo
//! system_prompts = ["You are ..."]
//! tools = ["node_list", "move"]   # empty or absent: everything
//! blacklist = ["/rosout"]         # injected into blacklist-aware tools
//! script = "spot"                 # bundled rule script
//!
//! [constants]
//! heading_error_deg = 0.3
//! obstacle_distance_m = 4.0
//! fov_deg = 90.0
//! description = "I see ..."
//! status_delay_ticks = 50
//!
//! [[graph.nodes]]
//! name = "/talker"
//! publishes = [{ topic = "/chatter", type = "std_msgs/String" }]
//! services = [{ name = "/reset", request = { hard = "bool" }, response = { ok = true } }]
//!
//! [graph.params]
//! "/rosdistro" = "noetic"
//!
//! [[graph.messages]]
//! node = "/talker"
//! topic = "/chatter"
//! payload = { data = "hello" }
//!
//! [[graph.logs]]
//! node = "/talker"
//! level = "ERROR"
//! text = "..."
//! ```
//!
//! Robot behavior (subscribers, services with side effects, the robot
//! tools themselves) is code; the file only seeds passive structure.

mod carter;
mod def;
mod demo;
mod eels;
mod pose;
mod spot;

use std::path::Path;
use std::sync::Arc;

use parking_lot::Mutex;
use serde_json::{json, Value};

use crate::agent::{AgentConfig, AgentError, AgentSession};
use crate::graphsim::{Graph, GraphConfig, GraphError, NodeSpec, ParamValue, Payload};
use crate::models::{ModelBackend, Script, ScriptError};
use crate::toolkit::builtin::register_builtins;
use crate::toolkit::{Blacklist, RegistryError, ToolRegistry};

pub use self::carter::{CarterState, Snapshot, CAMERA_TOPIC, CAMERA_TYPE};
pub use self::def::{
    Constants, RobotKind, ScenarioDef, SeedGraph, SeedLog, SeedMessage, SeedNode, SeedService, TopicDecl,
};
pub use self::eels::{EelsState, HEAD_RAISE_SERVICE};
pub use self::pose::{normalize_deg, segment_fractions, wrap_360, Pose2D, SEGMENT_M};
pub use self::spot::{SpotState, BUTTON_B, JOY_TOPIC, JOY_TYPE};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0}")]
    UnknownScenario(String),
    #[error("{origin}: {reason}")]
    Parse { origin: String, reason: String },
    #[error("scenario {scenario}: {reason}")]
    Invalid { scenario: String, reason: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("script {name}: {source}")]
    Script {
        name: String,
        #[source]
        source: ScriptError,
    },
}

const SCENARIOS: &[(&str, &str)] = &[
    ("ros_demo", include_str!("assets/ros_demo.toml")),
    ("spot", include_str!("assets/spot.toml")),
    ("eels", include_str!("assets/eels.toml")),
    ("carter", include_str!("assets/carter.toml")),
];

const SCRIPTS: &[(&str, &str)] = &[
    ("ros_demo", include_str!("assets/ros_demo.rules")),
    ("spot", include_str!("assets/spot.rules")),
    ("eels", include_str!("assets/eels.rules")),
    ("carter", include_str!("assets/carter.rules")),
];

pub fn builtin_names() -> Vec<&'static str> {
    SCENARIOS.iter().map(|(n, _)| *n).collect()
}

/// Source text of a bundled rule script.
pub fn builtin_script(name: &str) -> Option<&'static str> {
    SCRIPTS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub(crate) fn payload(v: Value) -> Payload {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("robot tool payloads are objects"),
    }
}

/// Numeric argument after registry validation; absent optional means 0.
pub(crate) fn num_arg(args: &Payload, key: &str) -> f64 {
    args.get(key).and_then(Value::as_f64).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    def: ScenarioDef,
}

impl Scenario {
    pub fn builtin(name: &str) -> Result<Self, ScenarioError> {
        let (_, text) = SCENARIOS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ScenarioError::UnknownScenario(name.to_string()))?;
        Self::parse(text, name)
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// `origin` only labels errors.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ScenarioError> {
        let def: ScenarioDef = toml::from_str(text).map_err(|e| ScenarioError::Parse {
            origin: origin.to_string(),
            reason: e.to_string(),
        })?;
        Self::from_def(def)
    }

    pub fn from_def(def: ScenarioDef) -> Result<Self, ScenarioError> {
        let invalid = |reason: String| ScenarioError::Invalid {
            scenario: def.name.clone(),
            reason,
        };
        if def.system_prompts.iter().all(|p| p.trim().is_empty()) {
            return Err(invalid("at least one non-empty system prompt is required".into()));
        }
        let c = &def.constants;
        if !c.heading_error_deg.is_finite() {
            return Err(invalid("heading_error_deg must be finite".into()));
        }
        if !(c.obstacle_distance_m.is_finite() && c.obstacle_distance_m >= 0.0) {
            return Err(invalid("obstacle_distance_m must be a non-negative number".into()));
        }
        if !(c.fov_deg > 0.0 && c.fov_deg <= 360.0) {
            return Err(invalid("fov_deg must be in (0, 360]".into()));
        }
        if let Some(name) = &def.script {
            if builtin_script(name).is_none() {
                return Err(invalid(format!("no bundled script named {name}")));
            }
        }
        for (key, value) in &def.graph.params {
            if ParamValue::from_json(value).is_none() {
                return Err(invalid(format!("param {key} must be a bool, number or string")));
            }
        }
        Ok(Self { def })
    }

    pub fn def(&self) -> &ScenarioDef {
        &self.def
    }

    pub fn name(&self) -> &str {
        &self.def.name
    }

    pub fn constants_mut(&mut self) -> &mut Constants {
        &mut self.def.constants
    }

    /// The bundled script this scenario names, parsed.
    pub fn default_script(&self) -> Result<Option<Script>, ScenarioError> {
        let Some(name) = &self.def.script else {
            return Ok(None);
        };
        let text = builtin_script(name).expect("checked when the scenario was loaded");
        Script::parse(text).map(Some).map_err(|source| ScenarioError::Script {
            name: name.clone(),
            source,
        })
    }

    /// Build a live graph, tool registry and robot state.
    pub fn instantiate(&self, config: GraphConfig) -> Result<RobotInstance, ScenarioError> {
        let def = &self.def;
        let graph = Graph::new(config)?;
        let mut registry = ToolRegistry::new();
        register_builtins(&mut registry)?;
        let robot = match def.robot {
            RobotKind::Spot => Robot::Spot(spot::install(&graph, &mut registry, &def.constants)?),
            RobotKind::Eels => Robot::Eels(eels::install(&graph, &mut registry, &def.constants)?),
            RobotKind::Carter => Robot::Carter(carter::install(&graph, &mut registry, &def.constants)?),
            RobotKind::RosDemo => {
                demo::install(&mut registry, &def.constants)?;
                Robot::Demo
            }
        };
        seed(&graph, &def.graph)?;

        if !def.tools.is_empty() {
            if let Some(missing) = def.tools.iter().find(|t| registry.spec(t).is_none()) {
                return Err(ScenarioError::Invalid {
                    scenario: def.name.clone(),
                    reason: format!("enabled tool {missing} does not exist"),
                });
            }
            registry.retain(|spec| def.tools.contains(&spec.name));
        }
        let registry = registry.inject_blacklist(Blacklist::new(def.blacklist.iter().cloned()));
        Ok(RobotInstance {
            name: def.name.clone(),
            graph,
            registry,
            system_prompts: def.system_prompts.clone(),
            robot,
        })
    }
}

fn seed(graph: &Graph, seed: &SeedGraph) -> Result<(), ScenarioError> {
    for node in &seed.nodes {
        let mut spec = NodeSpec::new(&node.name);
        for t in &node.publishes {
            spec = spec.publishes(&t.topic, &t.message_type);
        }
        for t in &node.subscribes {
            spec = spec.subscribes(&t.topic, &t.message_type);
        }
        for s in &node.services {
            let response = s.response.clone();
            spec = spec.provides(&s.name, s.request.clone(), move |_| response.clone());
        }
        graph.register_node(spec)?;
    }
    for (key, value) in &seed.params {
        let value = ParamValue::from_json(value).expect("checked when the scenario was loaded");
        graph.set_param(key.clone(), value);
    }
    for m in &seed.messages {
        let handle = graph.node(&m.node)?;
        graph.publish(&handle, &m.topic, m.payload.clone())?;
    }
    for l in &seed.logs {
        graph.log(&l.node, &l.level, &l.text)?;
    }
    Ok(())
}

/// Handle to a robot's mutable state.
#[derive(Debug, Clone)]
pub enum Robot {
    Spot(Arc<Mutex<SpotState>>),
    Eels(Arc<Mutex<EelsState>>),
    Carter(Arc<Mutex<CarterState>>),
    Demo,
}

impl Robot {
    pub fn kind(&self) -> RobotKind {
        match self {
            Robot::Spot(_) => RobotKind::Spot,
            Robot::Eels(_) => RobotKind::Eels,
            Robot::Carter(_) => RobotKind::Carter,
            Robot::Demo => RobotKind::RosDemo,
        }
    }

    /// A copy of the current state as JSON, for diffing and display.
    pub fn snapshot(&self) -> Value {
        match self {
            Robot::Spot(s) => json!(*s.lock()),
            Robot::Eels(s) => json!(*s.lock()),
            Robot::Carter(s) => json!(*s.lock()),
            Robot::Demo => json!({}),
        }
    }

    pub fn spot(&self) -> Option<SpotState> {
        match self {
            Robot::Spot(s) => Some(s.lock().clone()),
            _ => None,
        }
    }

    pub fn eels(&self) -> Option<EelsState> {
        match self {
            Robot::Eels(s) => Some(s.lock().clone()),
            _ => None,
        }
    }

    pub fn carter(&self) -> Option<CarterState> {
        match self {
            Robot::Carter(s) => Some(s.lock().clone()),
            _ => None,
        }
    }

    /// Mutate robot state directly, e.g. to set up a test.
    pub fn with_spot<R>(&self, f: impl FnOnce(&mut SpotState) -> R) -> Option<R> {
        match self {
            Robot::Spot(s) => Some(f(&mut s.lock())),
            _ => None,
        }
    }

    pub fn with_eels<R>(&self, f: impl FnOnce(&mut EelsState) -> R) -> Option<R> {
        match self {
            Robot::Eels(s) => Some(f(&mut s.lock())),
            _ => None,
        }
    }

    pub fn with_carter<R>(&self, f: impl FnOnce(&mut CarterState) -> R) -> Option<R> {
        match self {
            Robot::Carter(s) => Some(f(&mut s.lock())),
            _ => None,
        }
    }
}

/// A scenario brought to life.
#[derive(Debug)]
pub struct RobotInstance {
    pub name: String,
    pub graph: Graph,
    pub registry: ToolRegistry,
    pub system_prompts: Vec<String>,
    pub robot: Robot,
}

impl RobotInstance {
    /// Bind an agent session to this robot. The robot handle is returned
    /// alongside so callers can inspect state.
    pub fn into_session(
        self,
        backend: Box<dyn ModelBackend>,
        config: AgentConfig,
    ) -> Result<(AgentSession, Robot), AgentError> {
        let session = AgentSession::new(self.graph, self.registry, self.system_prompts, backend, config)?;
        Ok((session, self.robot))
    }
}
