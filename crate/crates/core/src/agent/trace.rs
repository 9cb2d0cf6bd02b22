use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::graphsim::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// A model-issued batch.
    Loop,
    /// Resolution of a held call by an operator decision.
    Confirmation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub id: String,
    pub tool: String,
    pub args: Value,
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub id: String,
    pub tool: String,
    pub ok: bool,
    pub text: String,
    pub start_tick: Tick,
    pub end_tick: Tick,
}

/// One reasoning/action/observation iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub iteration: u32,
    pub phase: Phase,
    pub reasoning: String,
    pub actions: Vec<ActionRecord>,
    pub observations: Vec<ObservationRecord>,
}

impl StepTrace {
    pub fn tool_names(&self) -> Vec<&str> {
        self.actions.iter().map(|a| a.tool.as_str()).collect()
    }

    /// Tool names per parallel group, in execution order.
    pub fn groups(&self) -> Vec<Vec<&str>> {
        let mut out: Vec<Vec<&str>> = Vec::new();
        for a in &self.actions {
            if out.len() <= a.group {
                out.resize(a.group + 1, Vec::new());
            }
            out[a.group].push(a.tool.as_str());
        }
        out
    }
}

/// Operability counters for one session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub turns: u64,
    /// Turns ending in a model answer with no safety rejection on the way.
    pub tasks_completed: u64,
    /// Safety-gate rejections plus tool errors.
    pub incidents: u64,
    /// approvals + denials + overrides + estops.
    pub interventions: u64,
    pub approvals: u64,
    pub denials: u64,
    pub overrides: u64,
    pub estops: u64,
}

impl SessionMetrics {
    /// Mean turns between human interventions.
    pub fn mtbhi(&self) -> Option<f64> {
        (self.interventions > 0).then(|| self.turns as f64 / self.interventions as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnStatus {
    Completed,
    AwaitingConfirmation,
    IterationLimit,
    MalformedOutput,
}

/// Streamed while a turn runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentEvent {
    Reasoning {
        iteration: u32,
        text: String,
    },
    Action {
        iteration: u32,
        id: String,
        tool: String,
        args: Value,
        group: usize,
    },
    Observation {
        iteration: u32,
        id: String,
        tool: String,
        ok: bool,
        text: String,
    },
    /// An uplink call ran (or was refused) against the robot.
    Tool {
        id: String,
        tool: String,
        ok: bool,
        text: String,
        tick: Tick,
    },
    Step {
        trace: StepTrace,
    },
    Confirmation {
        call_id: String,
        tool: String,
        args: Value,
    },
    Final {
        text: String,
        status: TurnStatus,
    },
    Error {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnOutcome {
    pub answer: String,
    pub status: TurnStatus,
    pub traces: Vec<StepTrace>,
}
