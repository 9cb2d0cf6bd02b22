//! Batch execution: groups in order, calls inside a group concurrently.
//!
//! Every call in a parallel group records its start tick and then waits on
//! a barrier before running, so all calls of a group are in flight before
//! any of them finishes. The next group starts only after every thread of
//! the previous one has joined.

use std::sync::{Arc, Barrier};

use serde_json::Value;

use crate::graphsim::{Graph, Tick};
use crate::toolkit::{Origin, ToolContext, ToolError, ToolRegistry, ToolResult};

use super::parse::{observation_content, ToolCall, ToolCallBatch};
use super::safety::{PendingConfirmation, SafetyState};

#[derive(Debug, Clone, PartialEq)]
pub struct CallRecord {
    pub call: ToolCall,
    pub group: usize,
    pub outcome: Result<ToolResult, ToolError>,
    pub start_tick: Tick,
    pub end_tick: Tick,
    pub uplink: bool,
}

impl CallRecord {
    pub fn ok(&self) -> bool {
        self.outcome.is_ok()
    }

    pub fn text(&self) -> String {
        match &self.outcome {
            Ok(r) => r.rendered_text.clone(),
            Err(e) => e.to_string(),
        }
    }

    /// Content of the role=tool message fed back to the model.
    pub fn tool_message(&self) -> String {
        match &self.outcome {
            Ok(r) => observation_content(&self.call.id, Ok(&Value::Object(r.payload.clone()))),
            Err(e) => observation_content(&self.call.id, Err(&e.to_string())),
        }
    }
}

pub struct Executor<'a> {
    pub registry: &'a ToolRegistry,
    pub graph: &'a Graph,
    pub safety: &'a Arc<SafetyState>,
    pub require_confirmation: bool,
}

enum Disposition {
    Run,
    Done(ToolError),
}

impl Executor<'_> {
    /// Run `batch`, calling `on_group` with each group's records as soon as
    /// the group has joined. Returns all records in call order.
    pub fn execute_batch(
        &self,
        batch: &ToolCallBatch,
        on_group: &mut dyn FnMut(&[CallRecord]),
    ) -> Vec<CallRecord> {
        let mut all = Vec::with_capacity(batch.len());
        for (gi, group) in batch.groups.iter().enumerate() {
            // Gate decisions are made in call order before anything runs,
            // so which call gets held never depends on thread scheduling.
            let dispositions: Vec<Disposition> = group.iter().map(|c| self.gate(c)).collect();
            let records = self.run_group(gi, group, dispositions);
            on_group(&records);
            all.extend(records);
        }
        all
    }

    fn gate(&self, call: &ToolCall) -> Disposition {
        let Some(spec) = self.registry.spec(&call.name) else {
            return Disposition::Run;
        };
        if !spec.is_uplink() {
            return Disposition::Run;
        }
        if self.safety.is_estopped() {
            return Disposition::Done(ToolError::EStopped(call.name.clone()));
        }
        if !(self.require_confirmation && spec.confirmation_gated) {
            return Disposition::Run;
        }
        if let Err(e) = self.registry.validate_args(&call.name, &call.args) {
            return Disposition::Done(e);
        }
        let held = PendingConfirmation {
            call_id: call.id.clone(),
            tool: call.name.clone(),
            args: call.args.clone(),
        };
        match self.safety.hold(held) {
            Ok(()) => Disposition::Done(ToolError::ConfirmationRequired(call.name.clone())),
            Err(existing) => Disposition::Done(ToolError::ConfirmationPending {
                tool: call.name.clone(),
                pending: existing.tool,
            }),
        }
    }

    fn run_group(&self, gi: usize, group: &[ToolCall], dispositions: Vec<Disposition>) -> Vec<CallRecord> {
        let runnable = dispositions.iter().filter(|d| matches!(d, Disposition::Run)).count();
        let barrier = Barrier::new(runnable.max(1));
        let concurrent = runnable > 1;
        enum Slot<H> {
            Running(H),
            Done(CallRecord),
        }
        std::thread::scope(|scope| {
            let handles: Vec<_> = group
                .iter()
                .zip(dispositions)
                .map(|(call, d)| match d {
                    Disposition::Done(err) => {
                        let now = self.graph.now();
                        Slot::Done(self.record(call, gi, Err(err), now, now))
                    }
                    Disposition::Run if concurrent => {
                        let barrier = &barrier;
                        Slot::Running(scope.spawn(move || {
                            let start = self.graph.now();
                            barrier.wait();
                            let outcome = self.invoke(call, Origin::Agent);
                            self.record(call, gi, outcome, start, self.graph.now())
                        }))
                    }
                    Disposition::Run => {
                        let start = self.graph.now();
                        let outcome = self.invoke(call, Origin::Agent);
                        Slot::Done(self.record(call, gi, outcome, start, self.graph.now()))
                    }
                })
                .collect();
            handles
                .into_iter()
                .map(|h| match h {
                    Slot::Running(handle) => handle.join().expect("tool panics are caught by the registry"),
                    Slot::Done(done) => done,
                })
                .collect()
        })
    }

    /// Run one call without the confirmation gate (used after approval).
    pub fn run_approved(&self, call: &ToolCall) -> CallRecord {
        let start = self.graph.now();
        let outcome = self.invoke(call, Origin::Agent);
        self.record(call, 0, outcome, start, self.graph.now())
    }

    fn invoke(&self, call: &ToolCall, origin: Origin) -> Result<ToolResult, ToolError> {
        let ctx = ToolContext::new(self.graph.clone(), self.safety.clone(), call.id.clone(), origin);
        let uplink = self.registry.spec(&call.name).is_some_and(|s| s.is_uplink());
        let _channel = uplink.then(|| self.safety.mux().acquire_agent());
        self.registry.invoke(&ctx, &call.name, &call.args)
    }

    fn record(
        &self,
        call: &ToolCall,
        group: usize,
        outcome: Result<ToolResult, ToolError>,
        start_tick: Tick,
        end_tick: Tick,
    ) -> CallRecord {
        CallRecord {
            call: call.clone(),
            group,
            outcome,
            start_tick,
            end_tick,
            uplink: self.registry.spec(&call.name).is_some_and(|s| s.is_uplink()),
        }
    }
}
