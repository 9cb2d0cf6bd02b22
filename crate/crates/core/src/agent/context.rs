//! Context assembly with a token budget.
//!
//! The prompt is laid out as robot system prompts, then the tool catalog,
//! then the scratchpad, then chat history. Only history is evicted, oldest
//! non-system message first.

use serde::Serialize;

use super::message::{truncate_head, Message};

/// Deterministic token estimate: one token per four bytes, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

pub fn messages_tokens(messages: &[Message]) -> usize {
    messages.iter().map(Message::tokens).sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Eviction {
    pub kept: Vec<Message>,
    pub evicted: usize,
    /// False when only system messages remain and they still exceed the
    /// budget.
    pub fits: bool,
}

/// Drop non-system messages, oldest first, until `history` fits in
/// `available` tokens. Relative order is preserved.
pub fn evict_history(history: &[Message], available: usize) -> Eviction {
    let mut total = messages_tokens(history);
    let mut drop = vec![false; history.len()];
    let mut evicted = 0;
    for (i, m) in history.iter().enumerate() {
        if total <= available {
            break;
        }
        if !m.is_system() {
            drop[i] = true;
            total -= m.tokens();
            evicted += 1;
        }
    }
    let kept = history
        .iter()
        .zip(&drop)
        .filter(|(_, d)| !**d)
        .map(|(m, _)| m.clone())
        .collect();
    Eviction {
        kept,
        evicted,
        fits: total <= available,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    SystemPrompts,
    Catalog,
    Scratchpad,
    History,
}

/// Half-open message index range of one section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SectionSpan {
    pub section: Section,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssembledContext {
    pub messages: Vec<Message>,
    pub sections: Vec<SectionSpan>,
    pub tokens: usize,
    pub evicted: usize,
}

impl AssembledContext {
    pub fn span(&self, section: Section) -> SectionSpan {
        self.sections
            .iter()
            .copied()
            .find(|s| s.section == section)
            .expect("every section is present")
    }

    pub fn section(&self, section: Section) -> &[Message] {
        let s = self.span(section);
        &self.messages[s.start..s.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContextError {
    #[error("context budget of {budget} tokens is smaller than the {fixed} tokens of system prompts and tool catalog")]
    BudgetTooSmall { budget: usize, fixed: usize },
}

pub const CATALOG_HEADER: &str = "Available tools (JSON):\n";
pub const SCRATCHPAD_HEADER: &str = "Scratchpad:\n";

/// Build the model-facing message list. `rsps` and `catalog` are never cut;
/// the scratchpad loses its head if it does not fit, then history is
/// evicted oldest-first.
pub fn assemble_context(
    rsps: &[String],
    catalog: &str,
    scratchpad: &str,
    history: &[Message],
    budget: usize,
) -> Result<AssembledContext, ContextError> {
    let mut messages: Vec<Message> = rsps.iter().map(|t| Message::system(t.as_str())).collect();
    let rsp_end = messages.len();
    messages.push(Message::system(format!("{CATALOG_HEADER}{catalog}")));
    let fixed = messages_tokens(&messages);
    if fixed > budget {
        return Err(ContextError::BudgetTooSmall { budget, fixed });
    }

    let room = (budget - fixed) * 4;
    let pad_room = room.saturating_sub(SCRATCHPAD_HEADER.len());
    let pad = truncate_head(scratchpad, pad_room);
    let pad_msg = Message::system(format!("{SCRATCHPAD_HEADER}{pad}"));
    let pad_tokens = pad_msg.tokens();
    let used = fixed + pad_tokens;
    let pad_span = if used <= budget {
        messages.push(pad_msg);
        SectionSpan {
            section: Section::Scratchpad,
            start: rsp_end + 1,
            end: rsp_end + 2,
        }
    } else {
        SectionSpan {
            section: Section::Scratchpad,
            start: rsp_end + 1,
            end: rsp_end + 1,
        }
    };

    let used = messages_tokens(&messages);
    let eviction = evict_history(history, budget - used);
    let history_start = messages.len();
    messages.extend(eviction.kept);
    let tokens = messages_tokens(&messages);
    if tokens > budget {
        return Err(ContextError::BudgetTooSmall { budget, fixed: tokens });
    }
    let sections = vec![
        SectionSpan {
            section: Section::SystemPrompts,
            start: 0,
            end: rsp_end,
        },
        SectionSpan {
            section: Section::Catalog,
            start: rsp_end,
            end: rsp_end + 1,
        },
        pad_span,
        SectionSpan {
            section: Section::History,
            start: history_start,
            end: messages.len(),
        },
    ];
    Ok(AssembledContext {
        messages,
        sections,
        tokens,
        evicted: eviction.evicted,
    })
}

/// Text rendering of an assembled context, one block per message.
pub fn render_document(messages: &[Message]) -> String {
    let mut out = String::new();
    for m in messages {
        out.push_str(m.role.as_str());
        out.push_str(": ");
        out.push_str(&m.content);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::message::Role;

    #[test]
    fn token_examples() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("12345678"), 2);
        assert_eq!(estimate_tokens("123456789"), 3);
    }

    #[test]
    fn fitting_history_is_identity() {
        let h = vec![Message::new(Role::User, "hello", 1)];
        let e = evict_history(&h, 100);
        assert_eq!(e.kept, h);
        assert!(e.fits);
        assert_eq!(e.evicted, 0);
    }

    #[test]
    fn oversized_system_only_history_signals() {
        let h = vec![Message::system("x".repeat(40))];
        let e = evict_history(&h, 5);
        assert_eq!(e.kept.len(), 1);
        assert!(!e.fits);
    }

    #[test]
    fn budget_below_fixed_sections() {
        let rsps = vec!["r".repeat(400)];
        let err = assemble_context(&rsps, "[]", "", &[], 50).unwrap_err();
        assert!(matches!(err, ContextError::BudgetTooSmall { budget: 50, .. }));
    }

    #[test]
    fn empty_history_has_only_fixed_sections() {
        let ctx = assemble_context(&["be safe".into()], "[]", "plan", &[], 8192).unwrap();
        assert_eq!(ctx.messages.len(), 3);
        assert!(ctx.section(Section::History).is_empty());
        assert_eq!(ctx.section(Section::Scratchpad)[0].content, "Scratchpad:\nplan");
    }
}
