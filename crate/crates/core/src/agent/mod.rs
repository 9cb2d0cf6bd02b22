//! The reasoning/action/observation engine.
//!
//! An [`AgentSession`] owns the chat history, the scratchpad and a model
//! backend. Each user message runs the loop: assemble the context, ask
//! the model, execute the returned tool batch, feed the observations back,
//! and repeat until the model answers in plain text or the iteration limit
//! is hit. Uplink calls pass the safety gate in [`safety`].

mod context;
mod executor;
mod message;
mod parse;
pub mod safety;
mod session;
mod trace;

pub use self::context::{
    assemble_context, estimate_tokens, evict_history, messages_tokens, render_document, AssembledContext,
    ContextError, Eviction, Section, SectionSpan, CATALOG_HEADER, SCRATCHPAD_HEADER,
};
pub use self::executor::{CallRecord, Executor};
pub use self::message::{truncate_head, ChatHistory, HistoryError, Message, Role, Scratchpad};
pub use self::parse::{observation_content, parse_model_output, ModelOutput, ToolCall, ToolCallBatch};
pub use self::safety::{CommandMux, MuxGuard, PendingConfirmation, SafetyState};
pub use self::session::{
    AgentConfig, AgentError, AgentSession, ConfigError, Decision, SessionControls, SCRATCHPAD_TOOL,
};
pub use self::trace::{
    ActionRecord, AgentEvent, ObservationRecord, Phase, SessionMetrics, StepTrace, TurnOutcome, TurnStatus,
};
