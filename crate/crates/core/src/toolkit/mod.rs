//! Tool abstraction: declarative specs, a registry with argument
//! validation, blacklist injection, catalog rendering, and the built-in
//! introspection and utility tools.
//!
//! Every failure inside [`ToolRegistry::invoke`] comes back as a
//! [`ToolError`] value; the agent turns it into an observation for the
//! model instead of aborting the turn.

pub mod blacklist;
pub mod builtin;
mod context;
mod registry;
mod result;
mod spec;

pub use self::blacklist::Blacklist;
pub use self::context::{Origin, ToolContext};
pub use self::registry::{RegistryError, ToolFn, ToolRegistry};
pub use self::result::{canonical_json, ToolResult};
pub use self::spec::{Direction, ParamSpec, ParamType, ToolSpec, BLACKLIST_PARAM};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ToolError {
    #[error("unknown tool {0}")]
    UnknownTool(String),
    #[error("invalid arguments for {tool}: {}", violations.join("; "))]
    ArgValidation { tool: String, violations: Vec<String> },
    #[error("{0}")]
    Failed(String),
    #[error("e-stopped: {0} was not executed")]
    EStopped(String),
    #[error("cancelled: {0}")]
    Cancelled(String),
    #[error("confirmation required: {0} is held for operator approval")]
    ConfirmationRequired(String),
    #[error("confirmation pending for {pending}; {tool} was not executed")]
    ConfirmationPending { tool: String, pending: String },
    #[error("action denied by operator: {0} was not executed")]
    Denied(String),
}

impl ToolError {
    pub fn failed(msg: impl Into<String>) -> Self {
        ToolError::Failed(msg.into())
    }

    /// Rejections by the safety gate, as opposed to tool failures.
    pub fn is_safety_rejection(&self) -> bool {
        matches!(self, ToolError::EStopped(_) | ToolError::Denied(_))
    }

    /// Holds waiting on an operator; neither failures nor rejections.
    pub fn is_hold(&self) -> bool {
        matches!(
            self,
            ToolError::ConfirmationRequired(_) | ToolError::ConfirmationPending { .. }
        )
    }
}
