//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Every tolerance and count lives in the constants below.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use parking_lot::Mutex;
use rand::{rngs::StdRng, Rng, SeedableRng};
use serde_json::{json, Value};
use teleop_core::agent::{
    assemble_context, estimate_tokens, AgentConfig, AgentError, AgentSession, Decision, Message, Role, Section,
    TurnStatus,
};
use teleop_core::graphsim::{Graph, GraphConfig, NodeSpec, Tick};
use teleop_core::models::{validate_model, ModelCapabilities, Script, ScriptedBackend};
use teleop_core::scenarios::{Pose2D, Scenario, HEAD_RAISE_SERVICE};
use teleop_core::toolkit::builtin::register_builtins;
use teleop_core::toolkit::{canonical_json, Blacklist, ParamType, ToolContext, ToolError, ToolRegistry, ToolSpec};

use common::{called, decide, instance, invoke, say, session};

const FIG3_RUNTIME: Duration = Duration::from_secs(1);
const FIG10_PAYLOAD: &str = r#"{"namespace":"/","nodes":["/talker","/listener"],"pattern":".*","total":2}"#;
const STATUS_DELAY_TICKS: u64 = 50;
const DISTANCE_TOL: f64 = 1e-9;
const ANGLE_TOL: f64 = 1e-9;
const CALC_TOL: f64 = 1e-9;
const CONTEXT_CASES: usize = 1000;
const CONTEXT_RUNTIME: Duration = Duration::from_secs(10);
const BLACKLIST_CASES: usize = 500;
const ESTOP_ROUNDS: usize = 100;
const ITERATION_LIMITS: [u32; 3] = [1, 3, 10];
const MIN_CONTEXT: usize = 8192;

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// 1 ---------------------------------------------------------------------

fn node_list_trace() -> Check {
    let started = Instant::now();
    let (mut s, _) = session("ros_demo");
    let t = say(&mut s, "Provide me with a list of ROS nodes.");
    let elapsed = started.elapsed();
    ensure!(t.outcome.status == TurnStatus::Completed, "status {:?}", t.outcome.status);
    ensure!(t.outcome.traces.len() == 1, "{} traces", t.outcome.traces.len());
    let tr = &t.outcome.traces[0];
    ensure!(!tr.reasoning.is_empty(), "missing reasoning");
    ensure!(called(&t.outcome) == ["node_list"], "calls {:?}", called(&t.outcome));
    ensure!(tr.observations.len() == 1 && tr.observations[0].ok, "observation {:?}", tr.observations);
    let listed: BTreeSet<&str> = t
        .outcome
        .answer
        .lines()
        .filter_map(|l| l.strip_prefix("- "))
        .collect();
    let want = BTreeSet::from(["/rosout", "/talker", "/listener", "/parameter_server"]);
    ensure!(listed == want, "answer lists {listed:?}");
    let mentioned: Vec<&str> = t.outcome.answer.split_whitespace().filter(|w| w.starts_with('/')).collect();
    ensure!(mentioned.len() == 4, "answer mentions {mentioned:?}");
    ensure!(elapsed < FIG3_RUNTIME, "took {elapsed:?}");
    Ok(())
}

// 2 ---------------------------------------------------------------------

fn builtins() -> ToolRegistry {
    let mut r = ToolRegistry::new();
    register_builtins(&mut r).unwrap();
    r
}

fn graph_with(nodes: &[&str]) -> Graph {
    let g = Graph::new(GraphConfig::default()).unwrap();
    for n in nodes {
        g.register_node(NodeSpec::new(*n)).unwrap();
    }
    g
}

fn node_list_payload() -> Check {
    let g = graph_with(&["/talker", "/listener"]);
    let r = builtins()
        .invoke(&ToolContext::detached(g), "node_list", &json!({}))
        .map_err(|e| e.to_string())?;
    ensure!(r.rendered_text == FIG10_PAYLOAD, "got {}", r.rendered_text);
    Ok(())
}

// 3 ---------------------------------------------------------------------

fn status_report() -> Check {
    let mut scenario = Scenario::builtin("ros_demo").map_err(|e| e.to_string())?;
    scenario.constants_mut().status_delay_ticks = STATUS_DELAY_TICKS;
    let script = scenario.default_script().map_err(|e| e.to_string())?.unwrap();
    let (mut s, _) = common::session_with(scenario, script);
    let t = say(&mut s, "Give me a status report.");
    ensure!(t.outcome.status == TurnStatus::Completed, "status {:?}", t.outcome.status);
    let groups: Vec<Vec<Vec<&str>>> = t.outcome.traces.iter().map(|tr| tr.groups()).collect();
    ensure!(
        groups == vec![vec![vec!["get_robot_status"]], vec![vec!["get_battery_status", "get_cpu_status"]]],
        "groups {groups:?}"
    );
    let o = &t.outcome.traces[1].observations;
    let (a, b) = (&o[0], &o[1]);
    ensure!(a.end_tick - a.start_tick >= STATUS_DELAY_TICKS, "battery interval {a:?}");
    ensure!(b.end_tick - b.start_tick >= STATUS_DELAY_TICKS, "cpu interval {b:?}");
    ensure!(a.start_tick < b.end_tick && b.start_tick < a.end_tick, "no overlap: {a:?} {b:?}");
    ensure!(t.outcome.answer.starts_with("Status report"), "answer {}", t.outcome.answer);
    Ok(())
}

// 4 ---------------------------------------------------------------------

fn panorama(fov: f64) -> Result<Vec<f64>, String> {
    let (mut s, robot) = session("carter");
    say(&mut s, "Give me a 360 degree view of your surroundings.");
    let t = say(&mut s, &format!("Assume the camera FoV is {fov} degrees."));
    ensure!(t.outcome.status == TurnStatus::Completed, "status {:?}", t.outcome.status);
    let calls = called(&t.outcome);
    let pairs = calls.len() / 2;
    ensure!(
        calls.chunks(2).all(|c| c == ["rotate_camera", "capture_snapshot"]) && calls.len().is_multiple_of(2),
        "calls {calls:?}"
    );
    let step = 360.0 / pairs as f64;
    for tr in &t.outcome.traces {
        for a in tr.actions.iter().filter(|a| a.tool == "rotate_camera") {
            let angle = a.args["angle"].as_f64().unwrap_or(f64::NAN);
            ensure!(close(angle, step, ANGLE_TOL), "rotate_camera({angle}) with {pairs} snapshots");
        }
    }
    Ok(robot.carter().unwrap().snapshots.iter().map(|s| s.yaw).collect())
}

fn panorama_counts() -> Check {
    let mut yaws = panorama(90.0)?;
    yaws.sort_by(f64::total_cmp);
    ensure!(yaws == [0.0, 90.0, 180.0, 270.0], "fov 90 yaws {yaws:?}");
    for (fov, n) in [(120.0, 3), (100.0, 4)] {
        let got = panorama(fov)?.len();
        ensure!(got == n, "fov {fov}: {got} snapshots, want {n}");
    }
    Ok(())
}

// 5 ---------------------------------------------------------------------

fn carter_obstacle() -> Check {
    let inst = instance("carter");
    let r = invoke(&inst, "lidar_scan", json!({})).map_err(|e| e.to_string())?;
    let d = r.payload["obstacle_distance_m"].as_f64().unwrap_or(f64::NAN);
    ensure!(close(d, 4.0, DISTANCE_TOL), "lidar {d}");
    let err = invoke(&inst, "move_forward", json!({"distance_m": 5.0}));
    ensure!(
        matches!(&err, Err(ToolError::Failed(m)) if m.starts_with("ObstacleViolation")),
        "move_forward(5.0) gave {err:?}"
    );
    ensure!(inst.robot.carter().unwrap().pose == Pose2D::default(), "pose changed on violation");

    let (mut s, robot) = session("carter");
    say(&mut s, "Move forward as far as you can.");
    say(&mut s, "Yes.");
    say(&mut s, "Yes.");
    let t = decide(&mut s, Decision::Approve);
    ensure!(t.outcome.status == TurnStatus::Completed, "status {:?}", t.outcome.status);
    let pose = robot.carter().unwrap().pose;
    ensure!(close(pose.x, 4.0, DISTANCE_TOL) && close(pose.y, 0.0, DISTANCE_TOL), "pose {pose:?}");
    Ok(())
}

// 6 ---------------------------------------------------------------------

fn spot_confirmation() -> Check {
    let (mut s, robot) = session("spot");
    say(&mut s, "Hey Spot, please stand up.");
    let t = say(&mut s, "Go ahead and walk forward about a meter and turn 15° to the left.");
    ensure!(t.outcome.status == TurnStatus::AwaitingConfirmation, "status {:?}", t.outcome.status);
    ensure!(robot.spot().unwrap().pose == Pose2D::default(), "moved before approval");
    let pending = s.controls().pending().ok_or("no pending confirmation")?;
    ensure!(
        pending.tool == "move" && pending.args == json!({"distance_m": 1, "turn_deg": 15}),
        "pending {pending:?}"
    );
    decide(&mut s, Decision::Approve);
    let p = robot.spot().unwrap().pose;
    ensure!(
        close(p.x, 1.0, DISTANCE_TOL) && close(p.y, 0.0, DISTANCE_TOL) && close(p.theta, 15.0, ANGLE_TOL),
        "pose {p:?}"
    );
    let m = s.metrics();
    ensure!(m.interventions == 1, "interventions {}", m.interventions);
    Ok(())
}

// 7 ---------------------------------------------------------------------

fn eels() -> Check {
    let inst = instance("eels");
    let r = invoke(&inst, "move_to_waypoint", json!({"x": 1, "y": -0.2, "theta": -90})).map_err(|e| e.to_string())?;
    let theta = inst.robot.eels().unwrap().pose.theta;
    ensure!(close(theta, -89.7, ANGLE_TOL), "achieved theta {theta}");
    let err = r.payload["heading_error_deg"].as_f64().unwrap_or(f64::NAN);
    ensure!(close(err, 0.3, ANGLE_TOL), "heading error {err}");

    let calls = |i: &teleop_core::scenarios::RobotInstance| i.graph.service_call_count(HEAD_RAISE_SERVICE).unwrap();
    invoke(&inst, "raise_head", json!({})).map_err(|e| e.to_string())?;
    ensure!(calls(&inst) == 1, "lowered: {} calls", calls(&inst));
    invoke(&inst, "raise_head", json!({})).map_err(|e| e.to_string())?;
    ensure!(calls(&inst) == 1, "raised: {} calls", calls(&inst));

    let (mut s, _) = session("eels");
    let t = say(&mut s, "Move toward the rock in the corner.");
    let motion = ["move_to_waypoint", "raise_head"];
    let used: Vec<String> = called(&t.outcome).into_iter().filter(|c| motion.contains(&c.as_str())).collect();
    ensure!(used.is_empty(), "motion tools {used:?}");
    ensure!(t.outcome.answer.contains("(x, y, θ)"), "answer {}", t.outcome.answer);
    Ok(())
}

// 8 ---------------------------------------------------------------------

fn word(rng: &mut StdRng, max: usize) -> String {
    let n = rng.random_range(0..=max);
    (0..n).map(|_| if rng.random_ratio(1, 6) { ' ' } else { rng.random_range('a'..='z') }).collect()
}

fn context_properties() -> Check {
    let mut rng = StdRng::seed_from_u64(8);
    let started = Instant::now();
    for case in 0..CONTEXT_CASES {
        let rsps: Vec<String> = (0..rng.random_range(1..4)).map(|_| format!("r{}", word(&mut rng, 200))).collect();
        let catalog = word(&mut rng, 400);
        let pad = word(&mut rng, 300);
        let history: Vec<Message> = (0..rng.random_range(0..40))
            .map(|i| {
                let role = [Role::User, Role::Assistant, Role::Tool][rng.random_range(0..3)];
                Message::new(role, word(&mut rng, 160), i as Tick + 1)
            })
            .collect();
        let budget = rng.random_range(0..600);
        let fixed: usize = rsps.iter().map(|r| estimate_tokens(r)).sum::<usize>()
            + estimate_tokens(&format!("Available tools (JSON):\n{catalog}"));
        let ctx = match assemble_context(&rsps, &catalog, &pad, &history, budget) {
            Err(_) => {
                ensure!(fixed > budget, "case {case}: rejected although fixed {fixed} <= {budget}");
                continue;
            }
            Ok(ctx) => ctx,
        };
        ensure!(ctx.tokens <= budget, "case {case}: {} tokens over {budget}", ctx.tokens);
        let order: Vec<Section> = ctx.sections.iter().map(|s| s.section).collect();
        ensure!(
            order == [Section::SystemPrompts, Section::Catalog, Section::Scratchpad, Section::History],
            "case {case}: order {order:?}"
        );
        ensure!(ctx.sections.windows(2).all(|w| w[0].end == w[1].start), "case {case}: gap between sections");
        let sys: Vec<&str> = ctx.section(Section::SystemPrompts).iter().map(|m| m.content.as_str()).collect();
        ensure!(sys == rsps.iter().map(String::as_str).collect::<Vec<_>>(), "case {case}: system prompts altered");
        let kept = ctx.section(Section::History);
        ensure!(kept == &history[ctx.evicted..], "case {case}: history is not the newest suffix");
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < CONTEXT_RUNTIME, "took {elapsed:?}");
    Ok(())
}

// 9 ---------------------------------------------------------------------

fn blacklist_union() -> Check {
    let mut rng = StdRng::seed_from_u64(9);
    let segs = ["a", "b", "diag", "talker", "sensors", "x1"];
    let globs = ["/diag*", "/a*", "/sensors/*"];
    let plain = builtins();
    for case in 0..BLACKLIST_CASES {
        let names: BTreeSet<String> = (0..rng.random_range(0..10))
            .map(|_| {
                let depth = rng.random_range(1..3);
                let parts: Vec<&str> = (0..depth).map(|_| segs[rng.random_range(0..segs.len())]).collect();
                format!("/{}", parts.join("/"))
            })
            .collect();
        let pool: Vec<String> = names.iter().cloned().chain(globs.iter().map(|g| g.to_string())).collect();
        let pick = |rng: &mut StdRng| -> Vec<String> {
            (0..rng.random_range(0..4)).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect()
        };
        let global = pick(&mut rng);
        let agent = pick(&mut rng);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let ctx = ToolContext::detached(graph_with(&refs));
        let injected = builtins().inject_blacklist(Blacklist::new(global.clone()));
        let got = injected
            .invoke(&ctx, "node_list", &json!({"blacklist": agent}))
            .map_err(|e| e.to_string())?;
        let union: Vec<String> = global.iter().chain(&agent).cloned().collect();
        let want = plain
            .invoke(&ctx, "node_list", &json!({"blacklist": union}))
            .map_err(|e| e.to_string())?;
        let got_text = canonical_json(&Value::Object(got.payload.clone()));
        ensure!(got_text == want.rendered_text, "case {case}: {got_text} != {}", want.rendered_text);
        let (g, a) = (Blacklist::new(global), Blacklist::new(agent));
        let survivors: Vec<String> = serde_json::from_value(got.payload["nodes"].clone()).unwrap();
        ensure!(
            survivors.iter().all(|n| !g.matches(n) && !a.matches(n)),
            "case {case}: blacklisted node survived in {survivors:?}"
        );
    }
    // The worked example: global ["/rosout"], agent ["/talker"].
    let ctx = ToolContext::detached(graph_with(&["/rosout", "/talker", "/listener"]));
    let r = builtins()
        .inject_blacklist(Blacklist::new(["/rosout"]))
        .invoke(&ctx, "node_list", &json!({"blacklist": ["/talker"]}))
        .map_err(|e| e.to_string())?;
    ensure!(r.payload["nodes"] == json!(["/listener"]), "worked example gave {}", r.rendered_text);
    Ok(())
}

// 10 --------------------------------------------------------------------

fn scripted(graph: &Graph, registry: ToolRegistry, script: &str, config: AgentConfig) -> AgentSession {
    AgentSession::new(
        graph.clone(),
        registry,
        vec!["You operate a test robot.".into()],
        Box::new(ScriptedBackend::new(Script::parse(script).unwrap())),
        config,
    )
    .unwrap()
}

const DRIVE: &str = "
rule go
  on user /go/
  call drive {}
  also drive {}
  call drive {}
  call look {}
  call drive {}
end
rule done
  on step 1
  say stopped
end
";

fn drive_registry(log: Arc<Mutex<Vec<Tick>>>) -> ToolRegistry {
    let mut r = ToolRegistry::new();
    let spec = ToolSpec::uplink("drive", "Drive in small steps.").with_default("steps", ParamType::Integer, json!(5), "Steps.");
    r.register(spec, move |ctx, args| {
        for _ in 0..args["steps"].as_u64().unwrap_or(5) {
            ctx.actuate(|| {
                log.lock().push(ctx.graph().now());
                Ok(())
            })?;
            ctx.sleep_ticks(1);
        }
        Ok(Default::default())
    })
    .unwrap();
    r.register(ToolSpec::downlink("look", "Read-only."), |_, _| Ok(Default::default())).unwrap();
    r
}

fn limit_and_estop() -> Check {
    for max in ITERATION_LIMITS {
        let g = Graph::new(GraphConfig::default()).unwrap();
        let calls = Arc::new(AtomicUsize::new(0));
        let c = calls.clone();
        let mut r = ToolRegistry::new();
        r.register(ToolSpec::downlink("look", "Read-only."), move |_, _| {
            c.fetch_add(1, Ordering::SeqCst);
            Ok(Default::default())
        })
        .unwrap();
        let config = AgentConfig {
            max_iterations: max,
            ..AgentConfig::default()
        };
        let mut s = scripted(&g, r, "rule forever\n  call look {}\nend\n", config);
        let t = say(&mut s, "anything");
        ensure!(t.outcome.status == TurnStatus::IterationLimit, "max {max}: status {:?}", t.outcome.status);
        ensure!(t.outcome.traces.len() == max as usize, "max {max}: {} traces", t.outcome.traces.len());
        ensure!(calls.load(Ordering::SeqCst) == max as usize, "max {max}: tool ran {} times", calls.load(Ordering::SeqCst));
        ensure!(t.outcome.answer.contains("Iteration limit"), "max {max}: diagnostic {}", t.outcome.answer);
    }

    let mut rng = StdRng::seed_from_u64(10);
    for round in 0..ESTOP_ROUNDS {
        let g = Graph::new(GraphConfig::default()).unwrap();
        let log = Arc::new(Mutex::new(Vec::new()));
        let mut s = scripted(&g, drive_registry(log.clone()), DRIVE, AgentConfig::default());
        let controls = s.controls().clone();
        let wait: u32 = rng.random_range(0..400);
        let stopper = std::thread::spawn(move || {
            for _ in 0..wait {
                std::thread::yield_now();
            }
            controls.estop()
        });
        say(&mut s, "go");
        let ack = stopper.join().unwrap();
        let late: Vec<Tick> = log.lock().iter().copied().filter(|&t| t >= ack).collect();
        ensure!(late.is_empty(), "round {round}: effects at {late:?} after ack {ack}");
    }
    Ok(())
}

// 11 --------------------------------------------------------------------

fn caps(supports_tool_calling: bool, max_context_tokens: usize) -> ModelCapabilities {
    ModelCapabilities {
        supports_tool_calling,
        max_context_tokens,
    }
}

fn model_validation() -> Check {
    for (c, ok) in [
        (caps(true, MIN_CONTEXT - 1), false),
        (caps(false, usize::MAX), false),
        (caps(true, MIN_CONTEXT), true),
    ] {
        ensure!(validate_model(c).is_ok() == ok, "{c:?}: expected accepted={ok}");
        let backend = ScriptedBackend::new(Script::parse("rule r\n  say hi\nend\n").unwrap()).with_capabilities(c);
        let made = AgentSession::new(
            Graph::new(GraphConfig::default()).unwrap(),
            ToolRegistry::new(),
            vec!["sys".into()],
            Box::new(backend),
            AgentConfig::default(),
        );
        match (made, ok) {
            (Ok(_), true) | (Err(AgentError::UnsuitableModel(_)), false) => {}
            (Ok(_), false) => return Err(format!("{c:?}: session created with unsuitable model")),
            (Err(e), _) => return Err(format!("{c:?}: {e}")),
        }
    }
    Ok(())
}

// 12 --------------------------------------------------------------------

/// sqrt(2) from an integer square root at 10^-30 resolution.
fn sqrt2_exact() -> f64 {
    let scale = BigInt::from(10).pow(30);
    let root = (BigInt::from(2) * &scale * &scale).sqrt();
    BigRational::new(root, scale).to_f64().unwrap()
}

fn calculation_tools() -> Check {
    let reg = builtins();
    let ctx = ToolContext::detached(Graph::new(GraphConfig::default()).unwrap());
    let sum = reg.invoke(&ctx, "add_all", &json!({"numbers": [1, 2, 3]})).map_err(|e| e.to_string())?;
    ensure!(sum.payload["value"].as_f64() == Some(6.0), "add_all {}", sum.rendered_text);

    let m = reg.invoke(&ctx, "mean", &json!({"numbers": [2, 4]})).map_err(|e| e.to_string())?;
    let mean = m.payload["mean"].as_f64().unwrap_or(f64::NAN);
    let sd = m.payload["stdev"].as_f64().unwrap_or(f64::NAN);
    let exact_mean = (BigRational::from_integer(2.into()) + BigRational::from_integer(4.into()))
        / BigRational::from_integer(2.into());
    let exact_mean = exact_mean.to_f64().unwrap();
    ensure!(close(mean, exact_mean, CALC_TOL), "mean {mean}");
    ensure!(close(sd, sqrt2_exact(), CALC_TOL), "stdev {sd}");
    Ok(())
}

// -----------------------------------------------------------------------

type Criterion = (&'static str, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("node list golden trace", node_list_trace),
        ("node_list canonical payload", node_list_payload),
        ("status report parallel group", status_report),
        ("carter panorama counts", panorama_counts),
        ("carter obstacle guard", carter_obstacle),
        ("spot confirmation", spot_confirmation),
        ("eels waypoint, head and refusal", eels),
        ("context assembly properties", context_properties),
        ("blacklist union property", blacklist_union),
        ("iteration limit and e-stop", limit_and_estop),
        ("model validation boundary", model_validation),
        ("calculation tools", calculation_tools),
    ];
    let quiet = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(()) => println!("criterion {:>2} PASS  {name}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    std::panic::set_hook(quiet);
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
