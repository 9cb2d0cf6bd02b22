use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graphsim::Tick;

use super::context::estimate_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    /// Tool observations fed back to the model.
    Tool,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Tool => "tool",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
    pub origin_tick: Tick,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>, origin_tick: Tick) -> Self {
        Self {
            role,
            content: content.into(),
            origin_tick,
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content, 0)
    }

    pub fn is_system(&self) -> bool {
        self.role == Role::System
    }

    pub fn tokens(&self) -> usize {
        estimate_tokens(&self.content)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HistoryError {
    #[error("system messages can only be added before the conversation starts")]
    LateSystemMessage,
    #[error("message at tick {got} is older than the latest message at tick {latest}")]
    OutOfOrder { got: Tick, latest: Tick },
}

/// Chronological conversation record.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChatHistory {
    messages: Vec<Message>,
}

impl ChatHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, message: Message) -> Result<(), HistoryError> {
        if message.is_system() && self.messages.iter().any(|m| !m.is_system()) {
            return Err(HistoryError::LateSystemMessage);
        }
        if let Some(last) = self.messages.last() {
            if message.origin_tick < last.origin_tick {
                return Err(HistoryError::OutOfOrder {
                    got: message.origin_tick,
                    latest: last.origin_tick,
                });
            }
        }
        self.messages.push(message);
        Ok(())
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn last(&self) -> Option<&Message> {
        self.messages.last()
    }

    /// Drops every non-system message.
    pub fn clear_conversation(&mut self) {
        self.messages.retain(Message::is_system);
    }
}

/// Bounded free text the agent keeps its current plan in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scratchpad {
    text: String,
    last_updated_tick: Tick,
    budget_tokens: usize,
}

impl Scratchpad {
    pub fn new(budget_tokens: usize) -> Self {
        Self {
            text: String::new(),
            last_updated_tick: 0,
            budget_tokens,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn last_updated_tick(&self) -> Tick {
        self.last_updated_tick
    }

    pub fn budget_tokens(&self) -> usize {
        self.budget_tokens
    }

    /// Replace the contents. Text over budget loses its head, so the most
    /// recent part of the plan survives. Returns true if text was cut.
    pub fn set(&mut self, text: &str, tick: Tick) -> bool {
        let kept = truncate_head(text, self.budget_tokens * 4);
        let cut = kept.len() < text.len();
        self.text = kept.to_string();
        self.last_updated_tick = tick;
        cut
    }

    pub fn clear(&mut self, tick: Tick) {
        self.text.clear();
        self.last_updated_tick = tick;
    }
}

/// Longest suffix of `text` that is at most `max_bytes` long and starts on
/// a char boundary.
pub fn truncate_head(text: &str, max_bytes: usize) -> &str {
    if text.len() <= max_bytes {
        return text;
    }
    let mut start = text.len() - max_bytes;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    &text[start..]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_messages_only_at_start() {
        let mut h = ChatHistory::new();
        h.push(Message::system("you are a robot")).unwrap();
        h.push(Message::new(Role::User, "hi", 1)).unwrap();
        assert_eq!(h.push(Message::system("late")), Err(HistoryError::LateSystemMessage));
        assert!(matches!(
            h.push(Message::new(Role::User, "old", 0)),
            Err(HistoryError::OutOfOrder { .. })
        ));
    }

    #[test]
    fn scratchpad_truncates_head_first() {
        let mut pad = Scratchpad::new(2);
        assert!(!pad.set("abcdefgh", 3));
        assert!(pad.set("0123456789", 4));
        assert_eq!(pad.text(), "23456789");
        assert_eq!(pad.last_updated_tick(), 4);
        assert!(pad.set("ééééé", 5));
        assert_eq!(pad.text(), "éééé");
    }
}
