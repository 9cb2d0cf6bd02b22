use std::sync::Arc;

use crate::agent::safety::SafetyState;
use crate::graphsim::{Graph, Tick};

use super::ToolError;

/// Who issued a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Agent,
    Human,
}

/// Everything a tool implementation may touch while it runs.
#[derive(Debug, Clone)]
pub struct ToolContext {
    graph: Graph,
    safety: Arc<SafetyState>,
    call_id: String,
    origin: Origin,
}

impl ToolContext {
    pub fn new(graph: Graph, safety: Arc<SafetyState>, call_id: impl Into<String>, origin: Origin) -> Self {
        Self {
            graph,
            safety,
            call_id: call_id.into(),
            origin,
        }
    }

    /// A context with its own, never-stopped safety state.
    pub fn detached(graph: Graph) -> Self {
        Self::new(graph, Arc::new(SafetyState::new()), "detached", Origin::Agent)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn safety(&self) -> &Arc<SafetyState> {
        &self.safety
    }

    pub fn call_id(&self) -> &str {
        &self.call_id
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn with_call_id(&self, call_id: impl Into<String>) -> Self {
        Self {
            call_id: call_id.into(),
            ..self.clone()
        }
    }

    /// Cancellation checkpoint for long-running uplink work.
    pub fn checkpoint(&self) -> Result<(), ToolError> {
        if self.safety.is_estopped() {
            Err(ToolError::Cancelled(format!("call {} cancelled by e-stop", self.call_id)))
        } else {
            Ok(())
        }
    }

    /// Apply one actuation step. The e-stop check and `effect` run under
    /// the graph guard, so the effect either lands before an e-stop
    /// acknowledgement or not at all.
    pub fn actuate<R>(&self, effect: impl FnOnce() -> Result<R, ToolError>) -> Result<R, ToolError> {
        self.graph.atomically(|| {
            self.checkpoint()?;
            effect()
        })
    }

    /// Let `ticks` units of logical time pass, one at a time, yielding to
    /// other threads between ticks.
    pub fn sleep_ticks(&self, ticks: u64) -> Tick {
        let mut now = self.graph.now();
        for _ in 0..ticks {
            now = self.graph.advance(1);
            std::thread::yield_now();
        }
        now
    }
}
