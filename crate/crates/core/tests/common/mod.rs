#![allow(dead_code)]

use std::sync::Arc;

use serde_json::Value;
use teleop_core::agent::{
    AgentConfig, AgentEvent, AgentSession, Decision, SafetyState, TurnOutcome, TurnStatus,
};
use teleop_core::graphsim::{Graph, GraphConfig};
use teleop_core::models::{Script, ScriptedBackend};
use teleop_core::scenarios::{Robot, RobotInstance, Scenario};
use teleop_core::toolkit::{Origin, ToolContext, ToolError, ToolResult};

pub fn instance(name: &str) -> RobotInstance {
    Scenario::builtin(name)
        .expect("bundled scenario")
        .instantiate(GraphConfig::default())
        .expect("scenario instantiates")
}

pub fn instance_with(name: &str, edit: impl FnOnce(&mut Scenario)) -> RobotInstance {
    let mut s = Scenario::builtin(name).expect("bundled scenario");
    edit(&mut s);
    s.instantiate(GraphConfig::default()).expect("scenario instantiates")
}

/// A session running the scenario's bundled script.
pub fn session(name: &str) -> (AgentSession, Robot) {
    let scenario = Scenario::builtin(name).expect("bundled scenario");
    let script = scenario.default_script().unwrap().expect("scenario has a script");
    session_with(scenario, script)
}

pub fn session_with(scenario: Scenario, script: Script) -> (AgentSession, Robot) {
    scenario
        .instantiate(GraphConfig::default())
        .unwrap()
        .into_session(Box::new(ScriptedBackend::new(script)), AgentConfig::default())
        .unwrap()
}

pub struct Turn {
    pub outcome: TurnOutcome,
    pub events: Vec<AgentEvent>,
}

pub fn say(s: &mut AgentSession, text: &str) -> Turn {
    let mut events = Vec::new();
    let outcome = s.run_turn(text, None, &mut |e| events.push(e)).expect("turn runs");
    Turn { outcome, events }
}

pub fn decide(s: &mut AgentSession, d: Decision) -> Turn {
    let mut events = Vec::new();
    let outcome = s.confirm_action(d, &mut |e| events.push(e)).expect("confirmation resolves");
    Turn { outcome, events }
}

pub fn completed(t: &Turn) -> &str {
    assert_eq!(t.outcome.status, TurnStatus::Completed, "answer: {}", t.outcome.answer);
    &t.outcome.answer
}

pub fn invoke(inst: &RobotInstance, tool: &str, args: Value) -> Result<ToolResult, ToolError> {
    let ctx = ToolContext::detached(inst.graph.clone());
    inst.registry.invoke(&ctx, tool, &args)
}

pub fn invoke_with(
    graph: &Graph,
    safety: &Arc<SafetyState>,
    inst: &RobotInstance,
    tool: &str,
    args: Value,
) -> Result<ToolResult, ToolError> {
    let ctx = ToolContext::new(graph.clone(), safety.clone(), "t", Origin::Agent);
    inst.registry.invoke(&ctx, tool, &args)
}

/// Tools called over the whole turn, in order.
pub fn called(t: &TurnOutcome) -> Vec<String> {
    t.traces.iter().flat_map(|tr| tr.actions.iter().map(|a| a.tool.clone())).collect()
}
