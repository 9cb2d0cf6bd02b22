//! Generic middleware demo: status queries that take time, plus a
//! diagnose/calibrate pair.

use serde_json::json;

use crate::toolkit::{ToolRegistry, ToolSpec};

use super::{payload, Constants, ScenarioError};

pub(super) fn install(registry: &mut ToolRegistry, constants: &Constants) -> Result<(), ScenarioError> {
    registry.register(
        ToolSpec::downlink("get_robot_status", "Overall robot status and the subsystems that can be queried."),
        |_, _| Ok(payload(json!({"status": "nominal", "subsystems": ["battery", "cpu"]}))),
    )?;
    let delay = constants.status_delay_ticks;
    registry.register(
        ToolSpec::downlink("get_battery_status", "Battery charge and voltage."),
        move |ctx, _| {
            ctx.sleep_ticks(delay);
            Ok(payload(json!({"percent": 87, "voltage": 24.1})))
        },
    )?;
    registry.register(
        ToolSpec::downlink("get_cpu_status", "CPU load and temperature."),
        move |ctx, _| {
            ctx.sleep_ticks(delay);
            Ok(payload(json!({"load_percent": 35, "temperature_c": 48})))
        },
    )?;
    registry.register(ToolSpec::downlink("diagnose", "Run self-diagnostics."), |_, _| {
        Ok(payload(json!({"faults": [], "ok": true})))
    })?;
    registry.register(ToolSpec::uplink("calibrate", "Calibrate the on-board sensors."), |ctx, _| {
        ctx.actuate(|| Ok(()))?;
        Ok(payload(json!({"value": "Sensors calibrated."})))
    })?;
    Ok(())
}
