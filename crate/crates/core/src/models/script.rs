//! Rule-file backend.
//!
//! A script is a list of rules. Lines starting with `#` are comments.
//!
//! ```text
//! rule <name>
//!   on user /<regex>/        latest user message(s) must match
//!   on tool /<regex>/        latest tool observation(s) must match
//!   on step <n>              number of assistant replies since the user spoke
//!   let <name> = <expr>
//!   reason <text>
//!   call <tool> <json>       starts a new sequential group
//!   also <tool> <json>       joins the previous call's parallel group
//!   repeat <expr>            body runs <expr> times with index `i`
//!     call ...
//!   done
//!   say <text>               plain-text answer (instead of calls); `\n` is a newline
//! end
//! ```
//!
//! A rule with no `on` line is a fallback: it is only tried after every
//! rule with triggers has failed to match. `let` takes an expression, a
//! path, or a "quoted string". Named regex groups and `let`
//! bindings become variables that persist for the rest of the session.
//! `result` is the most recent observation and `results.<tool>` the latest
//! observation of each tool in the last batch. Text and JSON may embed
//! `${expr}` or `${path | bullets}`, `${path | join}`, `${path | len}`.
//!
//! Matching is first-match starting at a cursor that sits just after the
//! previously matched rule, wrapping around to the top; fallbacks follow
//! the same order among themselves. No match is an error.

use std::collections::HashMap;
use std::path::Path;

use regex::Regex;
use serde_json::{json, Value};

use crate::agent::{parse_model_output, Message, ModelOutput, Role};
use crate::toolkit::canonical_json;

use super::eval::eval;
use super::{ModelBackend, ModelCapabilities, ModelError, ModelRequest, ModelResponse};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("script line {line}: {reason}")]
pub struct ScriptError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
enum Trigger {
    User(Regex),
    Tool(Regex),
    Step(usize),
}

#[derive(Debug, Clone)]
enum Item {
    Call { tool: String, args: String, join: bool },
    Repeat { count: String, body: Vec<Item> },
}

#[derive(Debug, Clone)]
struct Rule {
    name: String,
    triggers: Vec<Trigger>,
    lets: Vec<(String, String)>,
    reason: Option<String>,
    items: Vec<Item>,
    say: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Script {
    rules: Vec<Rule>,
}

fn err(line: usize, reason: impl Into<String>) -> ScriptError {
    ScriptError {
        line,
        reason: reason.into(),
    }
}

fn parse_regex(line: usize, rest: &str) -> Result<Regex, ScriptError> {
    let rest = rest.trim();
    let inner = rest
        .strip_prefix('/')
        .and_then(|r| r.strip_suffix('/'))
        .ok_or_else(|| err(line, "trigger pattern must be written /like this/"))?;
    Regex::new(inner).map_err(|e| err(line, format!("bad pattern: {e}")))
}

fn is_var_name(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

fn split_word(s: &str) -> (&str, &str) {
    match s.split_once(char::is_whitespace) {
        Some((a, b)) => (a, b.trim()),
        None => (s, ""),
    }
}

impl Script {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut rules = Vec::new();
        let mut current: Option<Rule> = None;
        let mut repeat: Option<(String, Vec<Item>, usize)> = None;
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            last_line = line_no;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, rest) = split_word(line);
            if word == "rule" {
                if current.is_some() {
                    return Err(err(line_no, "rule inside a rule (missing `end`)"));
                }
                if rest.is_empty() {
                    return Err(err(line_no, "rule needs a name"));
                }
                current = Some(Rule {
                    name: rest.to_string(),
                    triggers: Vec::new(),
                    lets: Vec::new(),
                    reason: None,
                    items: Vec::new(),
                    say: None,
                });
                continue;
            }
            let rule = current
                .as_mut()
                .ok_or_else(|| err(line_no, format!("`{word}` outside a rule")))?;
            match word {
                "end" => {
                    if repeat.is_some() {
                        return Err(err(line_no, "`end` inside repeat (missing `done`)"));
                    }
                    let rule = current.take().expect("checked above");
                    if rule.items.is_empty() == rule.say.is_none() {
                        return Err(err(line_no, format!("rule {} needs either calls or a say line", rule.name)));
                    }
                    if rule.reason.is_some() && rule.items.is_empty() {
                        return Err(err(line_no, "reason only applies to rules that call tools"));
                    }
                    rules.push(rule);
                }
                "on" => {
                    let (kind, pat) = split_word(rest);
                    let t = match kind {
                        "user" => Trigger::User(parse_regex(line_no, pat)?),
                        "tool" => Trigger::Tool(parse_regex(line_no, pat)?),
                        "step" => Trigger::Step(
                            pat.parse()
                                .map_err(|_| err(line_no, "step needs a non-negative integer"))?,
                        ),
                        other => return Err(err(line_no, format!("unknown trigger {other:?}"))),
                    };
                    rule.triggers.push(t);
                }
                "let" => {
                    let (name, expr) = rest
                        .split_once('=')
                        .ok_or_else(|| err(line_no, "let needs `name = expr`"))?;
                    let name = name.trim();
                    if !is_var_name(name) {
                        return Err(err(line_no, format!("bad variable name {name:?}")));
                    }
                    rule.lets.push((name.to_string(), expr.trim().to_string()));
                }
                "reason" => rule.reason = Some(rest.to_string()),
                "say" => {
                    if rule.say.is_some() {
                        return Err(err(line_no, "only one say line per rule"));
                    }
                    rule.say = Some(rest.replace("\\n", "\n"));
                }
                "call" | "also" => {
                    let (tool, args) = split_word(rest);
                    if !is_var_name(tool) {
                        return Err(err(line_no, format!("bad tool name {tool:?}")));
                    }
                    let item = Item::Call {
                        tool: tool.to_string(),
                        args: if args.is_empty() { "{}".into() } else { args.to_string() },
                        join: word == "also",
                    };
                    match &mut repeat {
                        Some((_, body, _)) => {
                            if word == "also" && body.is_empty() {
                                return Err(err(line_no, "`also` must follow a call"));
                            }
                            body.push(item)
                        }
                        None => {
                            if word == "also" && rule.items.is_empty() {
                                return Err(err(line_no, "`also` must follow a call"));
                            }
                            rule.items.push(item)
                        }
                    }
                }
                "repeat" => {
                    if repeat.is_some() {
                        return Err(err(line_no, "nested repeat is not supported"));
                    }
                    if rest.is_empty() {
                        return Err(err(line_no, "repeat needs a count"));
                    }
                    repeat = Some((rest.to_string(), Vec::new(), line_no));
                }
                "done" => {
                    let (count, body, _) = repeat.take().ok_or_else(|| err(line_no, "`done` without repeat"))?;
                    if body.is_empty() {
                        return Err(err(line_no, "empty repeat"));
                    }
                    rule.items.push(Item::Repeat { count, body });
                }
                other => return Err(err(line_no, format!("unknown directive {other:?}"))),
            }
        }
        if let Some((_, _, line)) = repeat {
            return Err(err(line, "repeat without `done`"));
        }
        if let Some(rule) = current {
            return Err(err(last_line, format!("rule {} has no `end`", rule.name)));
        }
        if rules.is_empty() {
            return Err(err(last_line, "script has no rules"));
        }
        Ok(Self { rules })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| err(0, format!("cannot read {}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn rule_names(&self) -> Vec<&str> {
        self.rules.iter().map(|r| r.name.as_str()).collect()
    }
}

/// What the latest part of the conversation looks like to the rules.
struct View {
    step: usize,
    user_text: String,
    tool_text: String,
    result: Option<Value>,
    results: serde_json::Map<String, Value>,
}

fn view(messages: &[Message]) -> View {
    let last_user = messages.iter().rposition(|m| m.role == Role::User);
    let step = match last_user {
        Some(u) => messages[u..].iter().filter(|m| m.role == Role::Assistant).count(),
        None => 0,
    };
    let last_assistant = messages.iter().rposition(|m| m.role == Role::Assistant);
    let tail = &messages[last_assistant.map_or(0, |i| i + 1)..];
    let join = |role: Role| {
        tail.iter()
            .filter(|m| m.role == role)
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    };
    // Call id -> tool name, from every batch the model issued.
    let mut names = HashMap::new();
    for m in messages.iter().filter(|m| m.role == Role::Assistant) {
        if let ModelOutput::Batch(b) = parse_model_output(&m.content) {
            for c in b.calls() {
                names.insert(c.id.clone(), c.name.clone());
            }
        }
    }
    let mut result = None;
    let mut results = serde_json::Map::new();
    for m in tail.iter().filter(|m| m.role == Role::Tool) {
        let Ok(obs) = serde_json::from_str::<Value>(&m.content) else {
            continue;
        };
        let value = match (obs.get("result"), obs.get("error")) {
            (Some(r), _) => r.clone(),
            (None, Some(e)) => json!({ "error": e }),
            _ => continue,
        };
        if let Some(name) = obs["id"].as_str().and_then(|id| names.get(id)) {
            results.insert(name.clone(), value.clone());
        }
        result = Some(value);
    }
    View {
        step,
        user_text: join(Role::User),
        tool_text: join(Role::Tool),
        result,
        results,
    }
}

fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        Value::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
        _ => None,
    }
}

/// Shortest text for a number; integral values print without a fraction.
pub(crate) fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x:.0}")
    } else {
        format!("{x}")
    }
}

fn is_path(s: &str) -> bool {
    !s.is_empty()
        && s.split('.').all(|seg| {
            !seg.is_empty() && seg.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        })
        && !s.starts_with(|c: char| c.is_ascii_digit())
}

struct Env<'a> {
    vars: &'a HashMap<String, Value>,
    view: &'a View,
    index: Option<usize>,
}

impl Env<'_> {
    fn lookup(&self, path: &str) -> Option<Value> {
        let mut segs = path.split('.');
        let root = segs.next()?;
        let mut cur = match root {
            "i" if self.index.is_some() => Value::from(self.index? as u64),
            "result" => self.view.result.clone()?,
            "results" => Value::Object(self.view.results.clone()),
            _ => self.vars.get(root)?.clone(),
        };
        for seg in segs {
            cur = match cur {
                Value::Object(mut m) => m.remove(seg)?,
                Value::Array(a) => a.into_iter().nth(seg.parse().ok()?)?,
                _ => return None,
            };
        }
        Some(cur)
    }

    fn number(&self, expr: &str) -> Result<f64, String> {
        eval(expr, &|name| self.lookup(name).as_ref().and_then(as_number)).map_err(|e| format!("{expr:?}: {e}"))
    }

    /// A bare path evaluates to its value; anything else is arithmetic.
    fn value(&self, expr: &str) -> Result<Value, String> {
        let expr = expr.trim();
        if let Some(lit) = expr.strip_prefix('"').and_then(|e| e.strip_suffix('"')) {
            return Ok(Value::String(lit.to_string()));
        }
        if is_path(expr) {
            if let Some(v) = self.lookup(expr) {
                return Ok(v);
            }
        }
        let n = self.number(expr)?;
        Ok(serde_json::Number::from_f64(n).map_or(Value::Null, Value::Number))
    }

    fn render(&self, template: &str, json_strings: bool) -> Result<String, String> {
        let mut out = String::new();
        let mut rest = template;
        while let Some(start) = rest.find("${") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let end = after.find('}').ok_or_else(|| format!("unclosed ${{ in {template:?}"))?;
            let inner = &after[..end];
            let (expr, filter) = match inner.split_once('|') {
                Some((e, f)) => (e.trim(), Some(f.trim())),
                None => (inner.trim(), None),
            };
            let v = self.value(expr)?;
            let text = match filter {
                None => plain(&v),
                Some("bullets") => list(&v)?.iter().map(|s| format!("- {s}")).collect::<Vec<_>>().join("\n"),
                Some("join") => list(&v)?.join(", "),
                Some("len") => list(&v)?.len().to_string(),
                Some(f) => return Err(format!("unknown filter {f:?}")),
            };
            if json_strings {
                let quoted = Value::String(text).to_string();
                out.push_str(&quoted[1..quoted.len() - 1]);
            } else {
                out.push_str(&text);
            }
            rest = &after[end + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.to_string(),
            None => format_number(n.as_f64().unwrap_or(f64::NAN)),
        },
        other => canonical_json(other),
    }
}

fn list(v: &Value) -> Result<Vec<String>, String> {
    match v {
        Value::Array(items) => Ok(items.iter().map(plain).collect()),
        other => Err(format!("expected a list, got {}", canonical_json(other))),
    }
}

/// Deterministic backend driven by a [`Script`].
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    script: Script,
    cursor: usize,
    vars: HashMap<String, Value>,
    next_id: u64,
    caps: ModelCapabilities,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        Self {
            script,
            cursor: 0,
            vars: HashMap::new(),
            next_id: 1,
            caps: ModelCapabilities {
                supports_tool_calling: true,
                max_context_tokens: 1 << 20,
            },
        }
    }

    pub fn with_capabilities(mut self, caps: ModelCapabilities) -> Self {
        self.caps = caps;
        self
    }

    /// Pre-set a variable, e.g. a scenario constant.
    pub fn set_var(&mut self, name: &str, value: Value) {
        self.vars.insert(name.to_string(), value);
    }

    pub fn var(&self, name: &str) -> Option<&Value> {
        self.vars.get(name)
    }

    fn matches(rule: &Rule, view: &View) -> Option<HashMap<String, Value>> {
        let mut caps = HashMap::new();
        for t in &rule.triggers {
            let (re, text) = match t {
                Trigger::Step(n) => {
                    if view.step != *n {
                        return None;
                    }
                    continue;
                }
                Trigger::User(re) => (re, &view.user_text),
                Trigger::Tool(re) => (re, &view.tool_text),
            };
            let c = re.captures(text)?;
            for name in re.capture_names().flatten() {
                if let Some(m) = c.name(name) {
                    caps.insert(name.to_string(), Value::String(m.as_str().to_string()));
                }
            }
        }
        Some(caps)
    }

    fn respond(&mut self, idx: usize, view: &View) -> Result<String, String> {
        let rule = self.script.rules[idx].clone();
        for (name, expr) in &rule.lets {
            let v = Env {
                vars: &self.vars,
                view,
                index: None,
            }
            .value(expr)?;
            self.vars.insert(name.clone(), v);
        }
        let env = Env {
            vars: &self.vars,
            view,
            index: None,
        };
        if let Some(say) = &rule.say {
            return env.render(say, false);
        }
        let mut calls = Vec::new();
        let mut group: i64 = -1;
        let mut next_id = self.next_id;
        let mut push = |tool: &str, args: &str, join: bool, env: &Env| -> Result<(), String> {
            if !join {
                group += 1;
            }
            let text = env.render(args, true)?;
            let args: Value =
                serde_json::from_str(&text).map_err(|e| format!("call {tool}: args are not JSON ({e}): {text}"))?;
            calls.push(json!({"id": format!("c{next_id}"), "group": group, "name": tool, "args": args}));
            next_id += 1;
            Ok(())
        };
        for item in &rule.items {
            match item {
                Item::Call { tool, args, join } => push(tool, args, *join, &env)?,
                Item::Repeat { count, body } => {
                    let n = env.number(count)?;
                    if n < 0.0 || n.fract() != 0.0 {
                        return Err(format!("repeat count {n} is not a non-negative integer"));
                    }
                    for i in 0..n as usize {
                        let env = Env {
                            vars: &self.vars,
                            view,
                            index: Some(i),
                        };
                        for b in body {
                            if let Item::Call { tool, args, join } = b {
                                push(tool, args, *join, &env)?;
                            }
                        }
                    }
                }
            }
        }
        self.next_id = next_id;
        if calls.is_empty() {
            return Err("rule produced no calls".into());
        }
        let mut wire = json!({ "tool_calls": calls });
        if let Some(r) = &rule.reason {
            wire["reasoning"] = Value::String(env.render(r, false)?);
        }
        Ok(canonical_json(&wire))
    }
}

impl ModelBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn capabilities(&self) -> ModelCapabilities {
        self.caps
    }

    fn complete(&mut self, request: &ModelRequest) -> Result<ModelResponse, ModelError> {
        let view = view(&request.messages);
        let n = self.script.rules.len();
        let order = (0..n).map(|k| (self.cursor + k) % n);
        let (triggered, fallbacks): (Vec<usize>, Vec<usize>) =
            order.partition(|&i| !self.script.rules[i].triggers.is_empty());
        for idx in triggered.into_iter().chain(fallbacks) {
            let Some(caps) = Self::matches(&self.script.rules[idx], &view) else {
                continue;
            };
            self.vars.extend(caps);
            self.cursor = idx + 1;
            let content = self.respond(idx, &view).map_err(|reason| ModelError::Script {
                rule: self.script.rules[idx].name.clone(),
                reason,
            })?;
            return Ok(ModelResponse { content });
        }
        let input = [view.user_text, view.tool_text]
            .into_iter()
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join("\n");
        Err(ModelError::NoMatchingRule { step: view.step, input })
    }
}
