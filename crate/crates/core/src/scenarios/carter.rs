//! Wheeled rover: a frontal obstacle seen by lidar, and a rotating camera.

use std::sync::Arc;

use parking_lot::Mutex;
use serde::Serialize;
use serde_json::json;

use crate::graphsim::{Graph, NodeSpec, Tick};
use crate::toolkit::{ParamType, ToolError, ToolRegistry, ToolSpec};

use super::pose::{segment_fractions, wrap_360, Pose2D};
use super::{num_arg, payload, Constants, ScenarioError};

pub const CAMERA_TOPIC: &str = "/carter/camera/rotate";
pub const CAMERA_TYPE: &str = "carter_msgs/CarterCameraRotate";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Snapshot {
    pub yaw: f64,
    pub tick: Tick,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarterState {
    pub pose: Pose2D,
    /// Degrees in [0, 360).
    pub camera_yaw: f64,
    pub fov_deg: f64,
    pub obstacle_distance_m: f64,
    /// Forward distance already driven toward the obstacle.
    pub progress_m: f64,
    pub snapshots: Vec<Snapshot>,
}

impl CarterState {
    pub fn clearance(&self) -> f64 {
        (self.obstacle_distance_m - self.progress_m).max(0.0)
    }
}

pub(super) fn install(
    graph: &Graph,
    registry: &mut ToolRegistry,
    constants: &Constants,
) -> Result<Arc<Mutex<CarterState>>, ScenarioError> {
    let state = Arc::new(Mutex::new(CarterState {
        pose: Pose2D::default(),
        camera_yaw: 0.0,
        fov_deg: constants.fov_deg,
        obstacle_distance_m: constants.obstacle_distance_m,
        progress_m: 0.0,
        snapshots: Vec::new(),
    }));

    graph.register_node(NodeSpec::new("/carter/camera_controller").subscribes(CAMERA_TOPIC, CAMERA_TYPE))?;
    let camera_pub = graph.register_node(NodeSpec::new("/rosa/carter_camera").publishes(CAMERA_TOPIC, CAMERA_TYPE))?;

    let s = state.clone();
    registry.register(
        ToolSpec::downlink("lidar_scan", "Scan ahead with the LiDAR and report the distance to the nearest obstacle."),
        move |_, _| Ok(payload(json!({"obstacle_distance_m": s.lock().clearance()}))),
    )?;

    let s = state.clone();
    registry.register(
        ToolSpec::uplink("move_forward", "Drive straight ahead. Fails without moving if an obstacle is closer than the distance.")
            .required("distance_m", ParamType::Number, "Distance to drive in meters.")
            .gated(),
        move |ctx, args| {
            let distance = num_arg(args, "distance_m");
            if distance < 0.0 {
                return Err(ToolError::failed("distance_m must not be negative"));
            }
            let (start, progress, clearance) = {
                let st = s.lock();
                (st.pose, st.progress_m, st.clearance())
            };
            if distance > clearance {
                return Err(ToolError::failed(format!(
                    "ObstacleViolation: requested {distance} m but the obstacle is {clearance} m ahead"
                )));
            }
            for f in segment_fractions(distance) {
                ctx.actuate(|| {
                    let mut st = s.lock();
                    st.pose = start.advanced(distance * f);
                    st.progress_m = progress + distance * f;
                    Ok(())
                })?;
                ctx.sleep_ticks(1);
            }
            let st = s.lock();
            Ok(payload(json!({
                "moved_m": distance,
                "clearance_m": st.clearance(),
                "pose": st.pose,
            })))
        },
    )?;

    let s = state.clone();
    registry.register(
        ToolSpec::uplink("rotate_camera", "Rotate the on-board camera sensor by a specified angle.")
            .required("angle", ParamType::Number, "Angle to rotate in degrees."),
        move |ctx, args| {
            let angle = num_arg(args, "angle");
            let msg = payload(json!({"angle_rad": angle.to_radians()}));
            ctx.actuate(|| {
                ctx.graph()
                    .publish(&camera_pub, CAMERA_TOPIC, msg)
                    .map_err(|e| ToolError::failed(e.to_string()))?;
                let mut st = s.lock();
                st.camera_yaw = wrap_360(st.camera_yaw + angle);
                Ok(())
            })?;
            Ok(payload(json!({"value": format!("Camera rotated by {angle:?} degrees.")})))
        },
    )?;

    let s = state.clone();
    registry.register(
        ToolSpec::downlink("capture_snapshot", "Capture an image at the current camera yaw."),
        move |ctx, _| {
            let tick = ctx.graph().now();
            let mut st = s.lock();
            let snap = Snapshot {
                yaw: st.camera_yaw,
                tick,
            };
            st.snapshots.push(snap);
            Ok(payload(json!(snap)))
        },
    )?;

    let description = constants.description.clone();
    registry.register(
        ToolSpec::downlink("describe_camera", "Describe what the camera currently sees."),
        move |_, _| Ok(payload(json!({"description": description}))),
    )?;

    Ok(state)
}
