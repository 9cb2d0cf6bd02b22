use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use indexmap::IndexMap;
use serde_json::{json, Value};

use crate::graphsim::Payload;

use super::{canonical_json, Blacklist, ToolContext, ToolError, ToolResult, ToolSpec, BLACKLIST_PARAM};

pub type ToolFn = Arc<dyn Fn(&ToolContext, &Payload) -> Result<Payload, ToolError> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("tool {0} is already registered")]
    DuplicateTool(String),
    #[error("tool {0} has no description")]
    MissingDescription(String),
    #[error("tool {tool}: {reason}")]
    InvalidSpec { tool: String, reason: String },
}

struct Entry {
    spec: ToolSpec,
    imp: ToolFn,
}

/// Tools by name, in registration order.
#[derive(Default)]
pub struct ToolRegistry {
    tools: IndexMap<String, Entry>,
    global_blacklist: Blacklist,
}

impl fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToolRegistry")
            .field("tools", &self.tools.keys().collect::<Vec<_>>())
            .field("global_blacklist", &self.global_blacklist)
            .finish()
    }
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check_spec(spec: &ToolSpec) -> Result<(), RegistryError> {
    let invalid = |reason: &str| RegistryError::InvalidSpec {
        tool: spec.name.clone(),
        reason: reason.to_string(),
    };
    if !is_identifier(&spec.name) {
        return Err(invalid("name must be an identifier"));
    }
    if spec.description.trim().is_empty() {
        return Err(RegistryError::MissingDescription(spec.name.clone()));
    }
    for (i, p) in spec.params.iter().enumerate() {
        if !is_identifier(&p.name) {
            return Err(invalid(&format!("parameter {:?} is not an identifier", p.name)));
        }
        if spec.params[..i].iter().any(|q| q.name == p.name) {
            return Err(invalid(&format!("parameter {} declared twice", p.name)));
        }
        if p.required && p.default.is_some() {
            return Err(invalid(&format!("required parameter {} has a default", p.name)));
        }
    }
    if spec.accepts_blacklist != spec.param(BLACKLIST_PARAM).is_some() {
        return Err(invalid("accepts_blacklist must match the presence of a blacklist parameter"));
    }
    if spec.confirmation_gated && !spec.is_uplink() {
        return Err(invalid("only uplink tools can be confirmation gated"));
    }
    Ok(())
}

/// Wraps `imp` so the effective blacklist is the global list united with
/// whatever the caller supplied.
fn wrap_blacklist(imp: ToolFn, global: Blacklist) -> ToolFn {
    Arc::new(move |ctx, args| {
        let supplied: Blacklist = args
            .get(BLACKLIST_PARAM)
            .and_then(|v| serde_json::from_value(v.clone()).ok())
            .unwrap_or_default();
        let mut args = args.clone();
        args.insert(
            BLACKLIST_PARAM.into(),
            serde_json::to_value(global.union(&supplied)).expect("list of strings"),
        );
        imp(ctx, &args)
    })
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<F>(&mut self, spec: ToolSpec, imp: F) -> Result<(), RegistryError>
    where
        F: Fn(&ToolContext, &Payload) -> Result<Payload, ToolError> + Send + Sync + 'static,
    {
        self.register_fn(spec, Arc::new(imp))
    }

    pub fn register_fn(&mut self, spec: ToolSpec, imp: ToolFn) -> Result<(), RegistryError> {
        check_spec(&spec)?;
        if self.tools.contains_key(&spec.name) {
            return Err(RegistryError::DuplicateTool(spec.name));
        }
        let imp = if spec.accepts_blacklist && !self.global_blacklist.is_empty() {
            wrap_blacklist(imp, self.global_blacklist.clone())
        } else {
            imp
        };
        self.tools.insert(spec.name.clone(), Entry { spec, imp });
        Ok(())
    }

    /// Builder form of [`register`](Self::register).
    pub fn with<F>(mut self, spec: ToolSpec, imp: F) -> Result<Self, RegistryError>
    where
        F: Fn(&ToolContext, &Payload) -> Result<Payload, ToolError> + Send + Sync + 'static,
    {
        self.register(spec, imp)?;
        Ok(self)
    }

    /// Wrap every blacklist-accepting tool so its effective blacklist is
    /// `global ∪ agent-supplied`. Tools without the parameter are untouched.
    pub fn inject_blacklist(mut self, global: Blacklist) -> Self {
        if global.is_empty() {
            return self;
        }
        for entry in self.tools.values_mut() {
            if entry.spec.accepts_blacklist {
                entry.imp = wrap_blacklist(entry.imp.clone(), global.clone());
            }
        }
        self.global_blacklist = self.global_blacklist.union(&global);
        self
    }

    /// Drop every tool whose spec fails `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(&ToolSpec) -> bool) {
        self.tools.retain(|_, e| keep(&e.spec));
    }

    pub fn global_blacklist(&self) -> &Blacklist {
        &self.global_blacklist
    }

    pub fn spec(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.get(name).map(|e| &e.spec)
    }

    pub fn specs(&self) -> impl Iterator<Item = &ToolSpec> {
        self.tools.values().map(|e| &e.spec)
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    /// One JSON object per tool, in registration order.
    pub fn catalog_entries(&self) -> Vec<Value> {
        self.specs()
            .map(|spec| {
                let params: Vec<Value> = spec
                    .params_for_rendering()
                    .map(|p| serde_json::to_value(p).expect("param spec serializes"))
                    .collect();
                json!({
                    "name": spec.name,
                    "description": spec.description,
                    "direction": spec.direction,
                    "confirmation_required": spec.confirmation_gated,
                    "params": params,
                })
            })
            .collect()
    }

    /// Deterministic model-facing tool schema document.
    pub fn render_catalog(&self) -> String {
        canonical_json(&Value::Array(self.catalog_entries()))
    }

    /// Check `args` against the tool's parameters. Unknown keys are
    /// rejected, required keys must be present, and numeric strings are
    /// coerced for numeric parameters. Defaults fill absent optional keys.
    /// Every violation is reported.
    pub fn validate_args(&self, name: &str, args: &Value) -> Result<Payload, ToolError> {
        let spec = self.spec(name).ok_or_else(|| ToolError::UnknownTool(name.to_string()))?;
        let empty = Payload::new();
        let given = match args {
            Value::Object(map) => map,
            Value::Null => &empty,
            _ => {
                return Err(ToolError::ArgValidation {
                    tool: name.to_string(),
                    violations: vec!["arguments must be a JSON object".into()],
                })
            }
        };
        let mut violations = Vec::new();
        for key in given.keys() {
            if spec.param(key).is_none() {
                violations.push(format!("unknown argument {key:?}"));
            }
        }
        let mut out = Payload::new();
        for p in &spec.params {
            match given.get(&p.name) {
                None | Some(Value::Null) if p.required => {
                    violations.push(format!("missing required argument {:?}", p.name))
                }
                None | Some(Value::Null) => {
                    if let Some(d) = &p.default {
                        out.insert(p.name.clone(), d.clone());
                    }
                }
                Some(v) => match p.ty.coerce(v) {
                    Some(v) => {
                        out.insert(p.name.clone(), v);
                    }
                    None => violations.push(format!("argument {:?} must be {}", p.name, p.ty.as_str())),
                },
            }
        }
        if violations.is_empty() {
            Ok(out)
        } else {
            Err(ToolError::ArgValidation {
                tool: name.to_string(),
                violations,
            })
        }
    }

    /// Validate and run a tool. Never panics past this boundary.
    pub fn invoke(&self, ctx: &ToolContext, name: &str, args: &Value) -> Result<ToolResult, ToolError> {
        let entry = self.tools.get(name).ok_or_else(|| ToolError::UnknownTool(name.to_string()))?;
        let args = self.validate_args(name, args)?;
        if entry.spec.is_uplink() && ctx.safety().is_estopped() {
            return Err(ToolError::EStopped(name.to_string()));
        }
        match catch_unwind(AssertUnwindSafe(|| (entry.imp)(ctx, &args))) {
            Ok(result) => result.map(ToolResult::new),
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| panic.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "unknown panic".into());
                Err(ToolError::Failed(format!("tool {name} panicked: {msg}")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphsim::Graph;
    use crate::toolkit::{Direction, ParamType};

    fn ok(_: &ToolContext, args: &Payload) -> Result<Payload, ToolError> {
        Ok(args.clone())
    }

    #[test]
    fn register_and_catalog() {
        let mut reg = ToolRegistry::new();
        reg.register(
            ToolSpec::downlink("rosnode_list", "Returns a list of running nodes.")
                .optional("pattern", ParamType::String, "regex")
                .with_blacklist(),
            ok,
        )
        .unwrap();
        assert!(reg.render_catalog().contains("\"name\":\"rosnode_list\""));
        assert_eq!(
            reg.register(ToolSpec::downlink("rosnode_list", "again"), ok).unwrap_err(),
            RegistryError::DuplicateTool("rosnode_list".into())
        );
        assert_eq!(
            reg.register(ToolSpec::downlink("silent", "  "), ok).unwrap_err(),
            RegistryError::MissingDescription("silent".into())
        );
    }

    #[test]
    fn empty_catalog() {
        assert_eq!(ToolRegistry::new().render_catalog(), "[]");
    }

    #[test]
    fn catalog_entry_lists_params_with_required_flags() {
        let reg = ToolRegistry::new()
            .with(
                ToolSpec::uplink("move", "Walk and turn.")
                    .required("distance_m", ParamType::Number, "meters")
                    .with_default("turn_deg", ParamType::Number, json!(0), "degrees")
                    .gated(),
                ok,
            )
            .unwrap();
        assert_eq!(
            reg.render_catalog(),
            concat!(
                r#"[{"confirmation_required":true,"description":"Walk and turn.","direction":"uplink","name":"move","#,
                r#""params":[{"description":"meters","name":"distance_m","required":true,"type":"number"},"#,
                r#"{"default":0,"description":"degrees","name":"turn_deg","required":false,"type":"number"}]}]"#
            )
        );
    }

    #[test]
    fn spec_consistency_is_checked() {
        let mut reg = ToolRegistry::new();
        let mut spec = ToolSpec::downlink("x", "d");
        spec.accepts_blacklist = true;
        assert!(matches!(reg.register(spec, ok), Err(RegistryError::InvalidSpec { .. })));
        let gated_downlink = ToolSpec::new("y", "d", Direction::Downlink).gated();
        assert!(matches!(reg.register(gated_downlink, ok), Err(RegistryError::InvalidSpec { .. })));
        assert!(matches!(
            reg.register(ToolSpec::downlink("bad name", "d"), ok),
            Err(RegistryError::InvalidSpec { .. })
        ));
    }

    #[test]
    fn validation_lists_every_violation() {
        let reg = ToolRegistry::new()
            .with(
                ToolSpec::downlink("t", "d")
                    .required("a", ParamType::Number, "")
                    .required("b", ParamType::String, ""),
                ok,
            )
            .unwrap();
        let err = reg.validate_args("t", &json!({"foo": 1, "b": 2})).unwrap_err();
        match err {
            ToolError::ArgValidation { violations, .. } => {
                assert_eq!(violations.len(), 3, "{violations:?}");
                assert!(violations.iter().any(|v| v.contains("\"foo\"")));
                assert!(violations.iter().any(|v| v.contains("\"a\"")));
                assert!(violations.iter().any(|v| v.contains("\"b\"")));
            }
            other => panic!("{other:?}"),
        }
        let coerced = reg.validate_args("t", &json!({"a": "2.5", "b": "x"})).unwrap();
        assert_eq!(coerced["a"], json!(2.5));
    }

    #[test]
    fn invoke_errors_are_values() {
        let reg = ToolRegistry::new()
            .with(ToolSpec::downlink("boom", "panics"), |_, _| panic!("kaboom"))
            .unwrap()
            .with(ToolSpec::uplink("act", "moves"), ok)
            .unwrap();
        let ctx = ToolContext::detached(Graph::default());
        assert_eq!(
            reg.invoke(&ctx, "nope", &json!({})).unwrap_err(),
            ToolError::UnknownTool("nope".into())
        );
        match reg.invoke(&ctx, "boom", &json!({})).unwrap_err() {
            ToolError::Failed(msg) => assert!(msg.contains("kaboom")),
            other => panic!("{other:?}"),
        }
        assert!(reg.invoke(&ctx, "act", &json!({})).is_ok());
        ctx.safety().estop(ctx.graph());
        assert_eq!(
            reg.invoke(&ctx, "act", &json!({})).unwrap_err(),
            ToolError::EStopped("act".into())
        );
    }

    #[test]
    fn injected_blacklist_is_union_of_global_and_agent() {
        let reg = ToolRegistry::new()
            .with(ToolSpec::downlink("echo_bl", "echo").with_blacklist(), ok)
            .unwrap()
            .with(ToolSpec::downlink("plain", "no blacklist"), ok)
            .unwrap()
            .inject_blacklist(Blacklist::new(["/rosout"]));
        let ctx = ToolContext::detached(Graph::default());
        let r = reg.invoke(&ctx, "echo_bl", &json!({"blacklist": ["/talker"]})).unwrap();
        assert_eq!(r.payload["blacklist"], json!(["/rosout", "/talker"]));
        let r = reg.invoke(&ctx, "echo_bl", &json!({})).unwrap();
        assert_eq!(r.payload["blacklist"], json!(["/rosout"]));
        let r = reg.invoke(&ctx, "plain", &json!({})).unwrap();
        assert!(r.payload.is_empty());
    }
}
