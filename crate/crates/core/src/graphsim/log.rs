use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{GraphError, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LogLevel {
    Debug,
    Info,
    Warn,
    Error,
    Fatal,
}

impl LogLevel {
    pub const ALL: [LogLevel; 5] = [
        LogLevel::Debug,
        LogLevel::Info,
        LogLevel::Warn,
        LogLevel::Error,
        LogLevel::Fatal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LogLevel::Debug => "DEBUG",
            LogLevel::Info => "INFO",
            LogLevel::Warn => "WARN",
            LogLevel::Error => "ERROR",
            LogLevel::Fatal => "FATAL",
        }
    }
}

impl fmt::Display for LogLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LogLevel {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LogLevel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| GraphError::BadLevel(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub tick: Tick,
    pub level: LogLevel,
    pub node: String,
    pub text: String,
}

/// `tick<TAB>LEVEL<TAB>node<TAB>text\n`
pub fn format_log_line(entry: &LogEntry) -> String {
    format!("{}\t{}\t{}\t{}\n", entry.tick, entry.level, entry.node, entry.text)
}

/// Parse one mirrored line (without its trailing newline).
pub fn parse_log_line(line: &str) -> Option<LogEntry> {
    let mut parts = line.splitn(4, '\t');
    let tick = parts.next()?.parse().ok()?;
    let level = parts.next()?.parse().ok()?;
    let node = parts.next()?;
    let text = parts.next()?;
    if !super::is_valid_name(node) {
        return None;
    }
    Some(LogEntry {
        tick,
        level,
        node: node.to_string(),
        text: text.to_string(),
    })
}

pub(super) fn single_line(text: &str) -> String {
    text.replace(['\r', '\n'], " ")
}

pub(super) fn truncate_mirror(path: &Path) -> Result<(), GraphError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| GraphError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, b"").map_err(|e| GraphError::Io(format!("{}: {e}", path.display())))
}

pub(super) fn append_mirror(path: &Path, entry: &LogEntry) -> Result<(), GraphError> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| GraphError::Io(format!("{}: {e}", path.display())))?;
    file.write_all(format_log_line(entry).as_bytes())
        .map_err(|e| GraphError::Io(format!("{}: {e}", path.display())))
}
