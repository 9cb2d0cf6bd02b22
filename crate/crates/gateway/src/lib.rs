//! Session service for the teleop runtime, with an HTTP front end that
//! streams agent events as NDJSON, an interactive REPL and the `teleop`
//! command line.
//!
//! HTTP routes:
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | `{"scenario", "config"?}` | `{"id"}` |
//! | GET | `/sessions/{id}` | | session status |
//! | POST | `/sessions/{id}/messages` | `{"text", "language"?}` | event stream |
//! | POST | `/sessions/{id}/confirm` | `{"decision": "approve"\|"deny"}` | event stream |
//! | POST | `/sessions/{id}/estop` | | `{"ack_tick"}` |
//! | POST | `/sessions/{id}/reset` | | `{"estopped": false}` |
//! | POST | `/sessions/{id}/override` | `{"tool", "args"?}` | `{"ok", "text", "payload"}` |
//! | GET | `/sessions/{id}/transcript` | | JSONL transcript |
//! | GET | `/sessions/{id}/metrics` | | counters plus `mtbhi` |
//!
//! Event streams carry one JSON object per line, tagged by `kind`.

pub mod config;
pub mod http;
pub mod repl;
pub mod service;
pub mod transcript;

use teleop_core::agent::AgentError;
use teleop_core::scenarios::ScenarioError;
use teleop_core::toolkit::ToolError;

pub use self::config::{ConfigOverrides, FileConfig, ModelSection};
pub use self::service::{CreateSession, ModelChoice, ServiceOptions, SessionService, SessionStatus, TurnPermit};
pub use self::transcript::{Input, RecordKind, Transcript, TranscriptRecord};

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("unknown scenario {0}")]
    UnknownScenario(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {0} is busy")]
    SessionBusy(String),
    #[error("session {0} has no pending confirmation")]
    NoPendingConfirmation(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error("transcript: {0}")]
    Io(#[from] std::io::Error),
}

impl GatewayError {
    /// Stable name for clients.
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownScenario(_) => "UnknownScenario",
            Self::InvalidConfig(_) => "InvalidConfig",
            Self::UnknownSession(_) => "UnknownSession",
            Self::SessionBusy(_) => "SessionBusy",
            Self::NoPendingConfirmation(_) => "NoPendingConfirmation",
            Self::Scenario(_) => "ScenarioError",
            Self::Agent(AgentError::Model(_)) => "ModelBackendUnavailable",
            Self::Agent(_) => "AgentError",
            Self::Tool(_) => "ToolError",
            Self::Io(_) => "TranscriptError",
        }
    }
}
