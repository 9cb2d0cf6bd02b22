//! Snake robot: waypoint navigation with a systematic heading error, and a
//! head module raised through a service.

use std::sync::Arc;

use parking_lot::Mutex;
use serde::Serialize;
use serde_json::json;

use crate::graphsim::{Graph, NodeSpec, Payload};
use crate::toolkit::{ParamType, ToolError, ToolRegistry, ToolSpec};

use super::pose::{normalize_deg, Pose2D};
use super::{num_arg, payload, Constants, ScenarioError};

pub const HEAD_RAISE_SERVICE: &str = "/head_raise";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EelsState {
    pub pose: Pose2D,
    pub head_raised: bool,
    pub heading_error_deg: f64,
}

pub(super) fn install(
    graph: &Graph,
    registry: &mut ToolRegistry,
    constants: &Constants,
) -> Result<Arc<Mutex<EelsState>>, ScenarioError> {
    let state = Arc::new(Mutex::new(EelsState {
        pose: Pose2D::default(),
        head_raised: false,
        heading_error_deg: constants.heading_error_deg,
    }));

    let s = state.clone();
    graph.register_node(NodeSpec::new("/eels/head_controller").provides(
        HEAD_RAISE_SERVICE,
        [],
        move |_| {
            s.lock().head_raised = true;
            Payload::new()
        },
    ))?;

    let s = state.clone();
    registry.register(
        ToolSpec::uplink(
            "move_to_waypoint",
            "Move to a waypoint given as x and y in meters and a final heading theta in degrees.",
        )
        .required("x", ParamType::Number, "Target x in meters.")
        .required("y", ParamType::Number, "Target y in meters.")
        .required("theta", ParamType::Number, "Target heading in degrees.")
        .gated(),
        move |ctx, args| {
            let requested = Pose2D::new(num_arg(args, "x"), num_arg(args, "y"), num_arg(args, "theta"));
            let achieved = ctx.actuate(|| {
                let mut st = s.lock();
                st.pose = Pose2D::new(requested.x, requested.y, requested.theta + st.heading_error_deg);
                Ok(st.pose)
            })?;
            Ok(payload(json!({
                "requested": requested,
                "achieved": achieved,
                "heading_error_deg": normalize_deg(achieved.theta - requested.theta),
            })))
        },
    )?;

    let s = state.clone();
    registry.register(ToolSpec::uplink("raise_head", "Raise the head module."), move |ctx, _| {
        if s.lock().head_raised {
            return Ok(payload(json!({"value": true})));
        }
        ctx.actuate(|| {
            ctx.graph()
                .call_service(HEAD_RAISE_SERVICE, &Payload::new())
                .map_err(|e| ToolError::failed(e.to_string()))
        })?;
        Ok(payload(json!({"value": true})))
    })?;

    let description = constants.description.clone();
    registry.register(
        ToolSpec::downlink("describe_camera", "Describe what the camera currently sees."),
        move |_, _| Ok(payload(json!({"description": description}))),
    )?;

    Ok(state)
}
