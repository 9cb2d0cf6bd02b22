use std::path::Path;

use serde_json::{json, Value};

use crate::graphsim::{parse_log_line, LogLevel, Payload};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LogReadError {
    #[error("FileNotFound: {0}")]
    FileNotFound(String),
    #[error("MalformedLine: line {line} of {file} is not `tick<TAB>LEVEL<TAB>node<TAB>text`")]
    MalformedLine { file: String, line: usize },
}

/// Read a mirrored log file, filter by exact level, keep the newest
/// `num_lines` entries.
pub fn read_log(
    directory: &str,
    filename: &str,
    level_filter: Option<LogLevel>,
    num_lines: Option<usize>,
) -> Result<Payload, LogReadError> {
    let path = Path::new(directory).join(filename);
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(&path).map_err(|_| LogReadError::FileNotFound(shown.clone()))?;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let entry = parse_log_line(line).ok_or(LogReadError::MalformedLine {
            file: shown.clone(),
            line: i + 1,
        })?;
        if level_filter.is_none_or(|l| entry.level == l) {
            entries.push(entry);
        }
    }
    if let Some(n) = num_lines {
        let skip = entries.len().saturating_sub(n);
        entries.drain(..skip);
    }
    let total = entries.len();
    let entries: Vec<Value> = entries
        .into_iter()
        .map(|e| json!({"tick": e.tick, "level": e.level, "node": e.node, "text": e.text}))
        .collect();
    let Value::Object(map) = json!({
        "entries": entries,
        "total": total,
        "level_filter": level_filter.map(LogLevel::as_str),
    }) else {
        unreachable!()
    };
    Ok(map)
}
