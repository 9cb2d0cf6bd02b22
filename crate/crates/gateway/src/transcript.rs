//! Append-only session transcripts: one JSON object per line, sorted keys.
//!
//! Reasoning, action and observation events are not recorded on their own;
//! the `step` record carries the whole trace. Operator inputs (`user`,
//! `override`, and `safety` records for decisions, e-stops and resets) can
//! be read back with [`inputs`] to drive a fresh session.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use teleop_core::agent::{AgentEvent, Decision};
use teleop_core::graphsim::Tick;
use teleop_core::toolkit::canonical_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    /// Written once, when the session is created.
    Session,
    User,
    Assistant,
    Step,
    Tool,
    Safety,
    Override,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub tick: Tick,
    pub kind: RecordKind,
    pub body: Value,
}

impl TranscriptRecord {
    pub fn new(tick: Tick, kind: RecordKind, body: Value) -> Self {
        Self { tick, kind, body }
    }

    pub fn to_line(&self) -> String {
        canonical_json(&json!({"tick": self.tick, "kind": self.kind, "body": self.body}))
    }

    /// The record for a streamed agent event, if it is one that is kept.
    pub fn from_event(event: &AgentEvent, now: Tick) -> Option<Self> {
        let (tick, kind, body) = match event {
            AgentEvent::Step { trace } => (now, RecordKind::Step, json!({ "trace": trace })),
            AgentEvent::Final { text, status } => (now, RecordKind::Assistant, json!({"text": text, "status": status})),
            AgentEvent::Error { message } => (now, RecordKind::Assistant, json!({ "error": message })),
            AgentEvent::Tool { id, tool, ok, text, tick } => (
                *tick,
                RecordKind::Tool,
                json!({"id": id, "tool": tool, "ok": ok, "text": text}),
            ),
            AgentEvent::Confirmation { call_id, tool, args } => (
                now,
                RecordKind::Safety,
                json!({"action": "confirmation_requested", "call_id": call_id, "tool": tool, "args": args}),
            ),
            AgentEvent::Reasoning { .. } | AgentEvent::Action { .. } | AgentEvent::Observation { .. } => return None,
        };
        Some(Self::new(tick, kind, body))
    }
}

#[derive(Debug)]
pub struct Transcript {
    lines: Vec<String>,
    file: Option<File>,
}

impl Transcript {
    pub fn in_memory() -> Self {
        Self {
            lines: Vec::new(),
            file: None,
        }
    }

    /// Mirror every record to `path` as it is appended.
    pub fn with_file(path: PathBuf) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            lines: Vec::new(),
            file: Some(file),
        })
    }

    pub fn append(&mut self, record: &TranscriptRecord) -> io::Result<()> {
        let line = record.to_line();
        if let Some(f) = &mut self.file {
            writeln!(f, "{line}")?;
            f.flush()?;
        }
        self.lines.push(line);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn export(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }
}

pub fn parse(text: &str) -> Result<Vec<TranscriptRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// An operator action recovered from a transcript.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    User { text: String, language: Option<String> },
    Decision(Decision),
    Estop,
    Reset,
    Override { tool: String, args: Value },
}

pub fn inputs(records: &[TranscriptRecord]) -> Vec<Input> {
    records
        .iter()
        .filter_map(|r| match r.kind {
            RecordKind::User => Some(Input::User {
                text: r.body["text"].as_str().unwrap_or_default().to_string(),
                language: r.body["language"].as_str().map(str::to_string),
            }),
            RecordKind::Override => Some(Input::Override {
                tool: r.body["tool"].as_str().unwrap_or_default().to_string(),
                args: r.body["args"].clone(),
            }),
            RecordKind::Safety => match r.body["action"].as_str() {
                Some("approve") => Some(Input::Decision(Decision::Approve)),
                Some("deny") => Some(Input::Decision(Decision::Deny)),
                Some("estop") => Some(Input::Estop),
                Some("reset") => Some(Input::Reset),
                _ => None,
            },
            _ => None,
        })
        .collect()
}
