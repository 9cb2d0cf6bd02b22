//! Safety state shared by a session, its tools and its operator controls.
//!
//! E-stop is a latched flag. Every uplink effect goes through
//! [`ToolContext::actuate`](crate::toolkit::ToolContext::actuate), which
//! checks the flag while holding the graph guard, and [`SafetyState::estop`]
//! sets it under the same guard. So no uplink effect can land at a tick later
//! than the e-stop acknowledgement.
//!
//! The [`CommandMux`] orders uplink commands: a waiting human command is
//! always granted before any waiting agent command.

use std::sync::atomic::{AtomicBool, Ordering};

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::graphsim::{Graph, Tick};

/// An uplink call held until an operator approves or denies it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingConfirmation {
    pub call_id: String,
    pub tool: String,
    pub args: Value,
}

#[derive(Debug, Default)]
pub struct SafetyState {
    estopped: AtomicBool,
    estop_tick: Mutex<Option<Tick>>,
    pending: Mutex<Option<PendingConfirmation>>,
    human_override_active: AtomicBool,
    mux: CommandMux,
}

impl SafetyState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_estopped(&self) -> bool {
        self.estopped.load(Ordering::SeqCst)
    }

    /// Latch the e-stop. Returns the acknowledgement tick.
    pub fn estop(&self, graph: &Graph) -> Tick {
        graph.atomically(|| {
            self.estopped.store(true, Ordering::SeqCst);
            let tick = graph.advance(1);
            *self.estop_tick.lock() = Some(tick);
            tick
        })
    }

    pub fn estop_tick(&self) -> Option<Tick> {
        *self.estop_tick.lock()
    }

    pub fn reset_estop(&self, graph: &Graph) {
        graph.atomically(|| {
            self.estopped.store(false, Ordering::SeqCst);
            *self.estop_tick.lock() = None;
        })
    }

    pub fn pending(&self) -> Option<PendingConfirmation> {
        self.pending.lock().clone()
    }

    /// Hold `call` for confirmation. Fails (returning the existing hold) if
    /// another call is already pending.
    pub fn hold(&self, call: PendingConfirmation) -> Result<(), PendingConfirmation> {
        let mut slot = self.pending.lock();
        match &*slot {
            Some(existing) => Err(existing.clone()),
            None => {
                *slot = Some(call);
                Ok(())
            }
        }
    }

    pub fn take_pending(&self) -> Option<PendingConfirmation> {
        self.pending.lock().take()
    }

    pub fn human_override_active(&self) -> bool {
        self.human_override_active.load(Ordering::SeqCst)
    }

    pub fn mux(&self) -> &CommandMux {
        &self.mux
    }

    pub(crate) fn set_override_active(&self, active: bool) {
        self.human_override_active.store(active, Ordering::SeqCst);
    }
}

#[derive(Debug, Default)]
struct MuxState {
    busy: bool,
    humans_waiting: usize,
}

/// Serializes uplink commands with human precedence.
#[derive(Debug, Default)]
pub struct CommandMux {
    state: Mutex<MuxState>,
    freed: Condvar,
}

impl CommandMux {
    /// Waits while the channel is busy or any human command is waiting.
    pub fn acquire_agent(&self) -> MuxGuard<'_> {
        let mut st = self.state.lock();
        while st.busy || st.humans_waiting > 0 {
            self.freed.wait(&mut st);
        }
        st.busy = true;
        MuxGuard { mux: self }
    }

    pub fn acquire_human(&self) -> MuxGuard<'_> {
        let mut st = self.state.lock();
        st.humans_waiting += 1;
        while st.busy {
            self.freed.wait(&mut st);
        }
        st.humans_waiting -= 1;
        st.busy = true;
        MuxGuard { mux: self }
    }

    pub fn humans_waiting(&self) -> usize {
        self.state.lock().humans_waiting
    }
}

pub struct MuxGuard<'a> {
    mux: &'a CommandMux,
}

impl Drop for MuxGuard<'_> {
    fn drop(&mut self) {
        self.mux.state.lock().busy = false;
        self.mux.freed.notify_all();
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;
    use std::time::Duration;

    use super::*;

    #[test]
    fn estop_latches_and_resets() {
        let graph = Graph::default();
        let safety = SafetyState::new();
        assert!(!safety.is_estopped());
        let ack = safety.estop(&graph);
        assert!(safety.is_estopped());
        assert_eq!(safety.estop_tick(), Some(ack));
        safety.reset_estop(&graph);
        assert!(!safety.is_estopped());
    }

    #[test]
    fn at_most_one_pending_confirmation() {
        let safety = SafetyState::new();
        let call = |id: &str| PendingConfirmation {
            call_id: id.into(),
            tool: "move".into(),
            args: Value::Null,
        };
        safety.hold(call("c1")).unwrap();
        assert_eq!(safety.hold(call("c2")).unwrap_err().call_id, "c1");
        assert_eq!(safety.take_pending().unwrap().call_id, "c1");
        assert!(safety.pending().is_none());
    }

    #[test]
    fn waiting_human_goes_before_waiting_agent() {
        let safety = Arc::new(SafetyState::new());
        let order = Arc::new(Mutex::new(Vec::new()));
        let first = safety.mux().acquire_agent();

        let s = safety.clone();
        let o = order.clone();
        let agent = std::thread::spawn(move || {
            let _g = s.mux().acquire_agent();
            o.lock().push("agent");
        });
        std::thread::sleep(Duration::from_millis(20));
        let s = safety.clone();
        let o = order.clone();
        let human = std::thread::spawn(move || {
            let _g = s.mux().acquire_human();
            o.lock().push("human");
        });
        while safety.mux().humans_waiting() == 0 {
            std::thread::yield_now();
        }
        drop(first);
        agent.join().unwrap();
        human.join().unwrap();
        assert_eq!(*order.lock(), vec!["human", "agent"]);
    }
}
