//! Tools every session gets: middleware introspection, log reading and
//! calculation helpers.

mod calc;
mod introspect;
mod logs;

use serde_json::{json, Value};

use crate::graphsim::Payload;

use super::{Blacklist, ParamType, RegistryError, ToolError, ToolRegistry, ToolSpec, BLACKLIST_PARAM};

pub use self::calc::{add_all, mean_stdev, CalcError};
pub use self::introspect::{node_list, topic_echo, EchoMode};
pub use self::logs::{read_log, LogReadError};

pub(crate) fn blacklist_arg(args: &Payload) -> Blacklist {
    args.get(BLACKLIST_PARAM)
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .unwrap_or_default()
}

fn str_arg<'a>(args: &'a Payload, key: &str) -> Option<&'a str> {
    args.get(key).and_then(Value::as_str)
}

fn numbers_arg(args: &Payload, key: &str) -> Vec<f64> {
    args.get(key)
        .and_then(Value::as_array)
        .map(|xs| xs.iter().filter_map(Value::as_f64).collect())
        .unwrap_or_default()
}

fn obj(v: Value) -> Payload {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("built-in payloads are objects"),
    }
}

/// Register the built-in tools into `registry`.
pub fn register_builtins(registry: &mut ToolRegistry) -> Result<(), RegistryError> {
    registry.register(
        ToolSpec::downlink("node_list", "Returns a list of running nodes with optional filtering.")
            .optional("pattern", ParamType::String, "A regex pattern to filter nodes (must match the whole name).")
            .optional("namespace", ParamType::String, "Namespace to scope the search.")
            .with_blacklist(),
        |ctx, args| {
            node_list(
                ctx.graph(),
                str_arg(args, "pattern"),
                str_arg(args, "namespace"),
                &blacklist_arg(args),
            )
        },
    )?;
    registry.register(
        ToolSpec::downlink(
            "topic_echo",
            "Lists topics (mode=list) or returns the most recent messages published on a topic (mode=echo).",
        )
        .with_default("mode", ParamType::String, json!("echo"), "Either \"list\" or \"echo\".")
        .optional("topic", ParamType::String, "Topic to echo (echo mode only).")
        .with_default("count", ParamType::Integer, json!(1), "Number of most recent messages to return.")
        .with_blacklist(),
        |ctx, args| {
            let mode: EchoMode = str_arg(args, "mode").unwrap_or("echo").parse()?;
            let count = args.get("count").and_then(Value::as_i64).unwrap_or(1);
            topic_echo(ctx.graph(), mode, str_arg(args, "topic"), count, &blacklist_arg(args))
        },
    )?;
    registry.register(
        ToolSpec::downlink("service_call", "Calls a service with a request and returns its response.")
            .required("service", ParamType::String, "Name of the service to call.")
            .with_default("request", ParamType::Object, json!({}), "Request fields."),
        |ctx, args| {
            let service = str_arg(args, "service").unwrap_or_default();
            let request = args.get("request").and_then(Value::as_object).cloned().unwrap_or_default();
            introspect::service_call(ctx.graph(), service, &request)
        },
    )?;
    registry.register(
        ToolSpec::downlink("param", "Lists parameter keys (mode=list) or gets one value (mode=get).")
            .with_default("mode", ParamType::String, json!("list"), "Either \"list\" or \"get\".")
            .optional("key", ParamType::String, "Parameter key for get."),
        |ctx, args| introspect::param_read(ctx.graph(), str_arg(args, "mode").unwrap_or("list"), str_arg(args, "key")),
    )?;
    registry.register(
        ToolSpec::uplink("param_set", "Sets a parameter to a scalar or string value.")
            .required("key", ParamType::String, "Parameter key.")
            .required("value", ParamType::String, "New value; numbers and booleans are recognized."),
        |ctx, args| {
            let key = str_arg(args, "key").unwrap_or_default().to_string();
            let raw = str_arg(args, "value").unwrap_or_default().to_string();
            ctx.actuate(|| introspect::param_set(ctx.graph(), key, &raw))
        },
    )?;
    registry.register(
        ToolSpec::downlink("read_log", "Reads a log file and returns entries matching the specified criteria.")
            .required("log_file_directory", ParamType::String, "Directory containing the log file.")
            .required("log_filename", ParamType::String, "Name of the log file.")
            .optional("level_filter", ParamType::String, "Only return entries with this level.")
            .optional("num_lines", ParamType::Integer, "Only return this many of the newest matching entries."),
        |_, args| {
            let num_lines = match args.get("num_lines").and_then(Value::as_i64) {
                Some(n) if n <= 0 => return Err(ToolError::failed("num_lines must be a positive integer")),
                Some(n) => Some(n as usize),
                None => None,
            };
            let level = match str_arg(args, "level_filter") {
                Some(l) => Some(l.parse().map_err(|e: crate::graphsim::GraphError| ToolError::failed(e.to_string()))?),
                None => None,
            };
            read_log(
                str_arg(args, "log_file_directory").unwrap_or_default(),
                str_arg(args, "log_filename").unwrap_or_default(),
                level,
                num_lines,
            )
            .map_err(|e| ToolError::failed(e.to_string()))
        },
    )?;
    registry.register(
        ToolSpec::downlink("add_all", "Returns the sum of numbers.")
            .required("numbers", ParamType::NumberList, "Numbers to add."),
        |_, args| {
            let sum = add_all(&numbers_arg(args, "numbers")).map_err(|e| ToolError::failed(e.to_string()))?;
            Ok(obj(json!({ "value": sum })))
        },
    )?;
    registry.register(
        ToolSpec::downlink("mean", "Returns the mean and standard deviation of a list of numbers.")
            .required("numbers", ParamType::NumberList, "At least two numbers."),
        |_, args| {
            let (mean, stdev) =
                mean_stdev(&numbers_arg(args, "numbers")).map_err(|e| ToolError::failed(e.to_string()))?;
            Ok(obj(json!({ "mean": mean, "stdev": stdev })))
        },
    )?;
    registry.register(
        ToolSpec::downlink("package_launch", "Lists or starts launch files of a package.")
            .required("package", ParamType::String, "Package name.")
            .optional("launch_file", ParamType::String, "Launch file to start."),
        |_, _| Ok(obj(json!({ "supported": false, "value": "not supported in simulation" }))),
    )?;
    Ok(())
}
