//! Legged robot: stand, walk, look.

use std::sync::Arc;

use parking_lot::Mutex;
use serde::Serialize;
use serde_json::{json, Value};

use crate::graphsim::{Graph, NodeSpec};
use crate::toolkit::{ParamType, ToolError, ToolRegistry, ToolSpec};

use super::pose::{segment_fractions, Pose2D};
use super::{num_arg, payload, Constants, ScenarioError};

pub const JOY_TOPIC: &str = "/joy";
pub const JOY_TYPE: &str = "sensor_msgs/Joy";
/// Index of the B button in a joy message's `buttons`.
pub const BUTTON_B: usize = 1;
const JOY_BUTTONS: usize = 11;
const JOY_AXES: usize = 8;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SpotState {
    pub standing: bool,
    pub pose: Pose2D,
    pub camera_feed_displayed: bool,
}

pub(super) fn install(
    graph: &Graph,
    registry: &mut ToolRegistry,
    constants: &Constants,
) -> Result<Arc<Mutex<SpotState>>, ScenarioError> {
    let state = Arc::new(Mutex::new(SpotState::default()));

    let s = state.clone();
    graph.register_node(NodeSpec::new("/spot/teleop_driver").on(JOY_TOPIC, JOY_TYPE, move |d| {
        let pressed = d
            .payload
            .get("buttons")
            .and_then(|b| b.get(BUTTON_B))
            .and_then(Value::as_i64)
            == Some(1);
        if pressed {
            s.lock().standing = true;
        }
    }))?;
    let joy = graph.register_node(NodeSpec::new("/rosa/joy_teleop").publishes(JOY_TOPIC, JOY_TYPE))?;

    let s = state.clone();
    registry.register(
        ToolSpec::uplink("stand_up", "Command the robot to stand."),
        move |ctx, _| {
            let mut buttons = vec![0; JOY_BUTTONS];
            buttons[BUTTON_B] = 1;
            let msg = payload(json!({"axes": vec![0.0; JOY_AXES], "buttons": buttons}));
            ctx.actuate(|| {
                ctx.graph()
                    .publish(&joy, JOY_TOPIC, msg)
                    .map_err(|e| ToolError::failed(e.to_string()))
            })?;
            if !s.lock().standing {
                return Err(ToolError::failed("stand command was published but the robot did not report standing"));
            }
            Ok(payload(json!({"value": "Spot is now standing up."})))
        },
    )?;

    let s = state.clone();
    registry.register(
        ToolSpec::uplink(
            "move",
            "Walk forward a distance along the current heading, then turn in place. Positive turns are to the left.",
        )
        .required("distance_m", ParamType::Number, "Distance to walk forward in meters.")
        .with_default("turn_deg", ParamType::Number, json!(0), "Angle to turn after walking, in degrees (left positive).")
        .gated(),
        move |ctx, args| {
            let distance = num_arg(args, "distance_m");
            let turn = num_arg(args, "turn_deg");
            let start = s.lock().pose;
            if !s.lock().standing {
                return Err(ToolError::failed("NotStanding: the robot must be standing to move"));
            }
            for f in segment_fractions(distance) {
                ctx.actuate(|| {
                    s.lock().pose = start.advanced(distance * f);
                    Ok(())
                })?;
                ctx.sleep_ticks(1);
            }
            let pose = ctx.actuate(|| {
                let mut st = s.lock();
                st.pose = st.pose.turned(turn);
                Ok(st.pose)
            })?;
            Ok(payload(json!({
                "distance_m": distance,
                "turn_deg": turn,
                "pose": pose,
            })))
        },
    )?;

    let s = state.clone();
    let description = constants.description.clone();
    registry.register(
        ToolSpec::downlink("describe_camera", "Describe what the camera currently sees.")
            .with_default(
                "show_feed",
                ParamType::Boolean,
                json!(false),
                "Also bring up the live camera feed on the operator display.",
            ),
        move |_, args| {
            let mut out = json!({"description": description});
            if args.get("show_feed").and_then(Value::as_bool) == Some(true) {
                s.lock().camera_feed_displayed = true;
                out["camera_feed_displayed"] = json!(true);
            }
            Ok(payload(out))
        },
    )?;

    let s = state.clone();
    registry.register(ToolSpec::downlink("get_pose", "Current pose (x, y in meters, theta in degrees)."), move |_, _| {
        Ok(payload(json!({"pose": s.lock().pose})))
    })?;

    Ok(state)
}
