//! Line-oriented operator console on one session.
//!
//! Meta-commands: `/confirm`, `/deny`, `/estop`, `/reset`, `/metrics`,
//! `/quit`. Anything else is sent to the agent.

use std::io::{self, BufRead, Write};

use teleop_core::agent::{AgentError, AgentEvent, Decision};

use crate::service::{CreateSession, SessionService};
use crate::GatewayError;

/// One line of output for an event, or nothing for events that only
/// matter to the transcript.
pub fn render_event(event: &AgentEvent) -> Option<String> {
    match event {
        AgentEvent::Reasoning { text, .. } if !text.is_empty() => Some(format!("thought: {text}")),
        AgentEvent::Action { tool, args, .. } => Some(format!("action: {tool}({args})")),
        AgentEvent::Observation { text, .. } => Some(format!("observation: {text}")),
        AgentEvent::Confirmation { tool, args, .. } => {
            Some(format!("confirm? {tool}({args}) [/confirm or /deny]"))
        }
        AgentEvent::Final { text, .. } => Some(text.clone()),
        AgentEvent::Error { message } => Some(format!("error: {message}")),
        _ => None,
    }
}

fn printer<W: Write>(out: &mut W) -> impl FnMut(&AgentEvent) + '_ {
    move |e| {
        if let Some(s) = render_event(e) {
            // Output errors surface on the next write in the loop.
            let _ = writeln!(out, "{s}");
        }
    }
}

/// Run until `/quit` or end of input. A model backend failure ends the
/// loop with an error; other failures are printed and the loop goes on.
pub fn run(
    service: &SessionService,
    scenario: &str,
    input: impl BufRead,
    out: &mut impl Write,
) -> Result<(), GatewayError> {
    let id = service.create_session(&CreateSession {
        scenario: scenario.to_string(),
        ..CreateSession::default()
    })?;
    writeln!(out, "session {id} on {scenario}. /confirm /deny /estop /reset /metrics /quit")?;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let result = match line {
            "/quit" => return Ok(()),
            "/confirm" => service.confirm(&id, Decision::Approve, &mut printer(out)).map(drop),
            "/deny" => service.confirm(&id, Decision::Deny, &mut printer(out)).map(drop),
            "/estop" => service.estop(&id).map(|t| {
                let _ = writeln!(out, "e-stop latched at tick {t}");
            }),
            "/reset" => service.reset_estop(&id).map(|()| {
                let _ = writeln!(out, "e-stop released");
            }),
            "/metrics" => service.metrics(&id).map(|m| {
                let _ = writeln!(out, "{}", serde_json::to_string(&m).unwrap_or_default());
            }),
            text => service.post_message(&id, text, None, &mut printer(out)).map(drop),
        };
        match result {
            Ok(()) => {}
            Err(e @ GatewayError::Agent(AgentError::Model(_))) => return Err(e),
            Err(GatewayError::Agent(_)) => {} // already printed as an error event
            Err(e) => writeln!(out, "error: {e}")?,
        }
        out.flush()?;
    }
    Ok(())
}

/// The REPL on standard input and output.
pub fn run_stdio(service: &SessionService, scenario: &str) -> Result<(), GatewayError> {
    let stdin = io::stdin();
    let mut stdout = io::stdout();
    run(service, scenario, stdin.lock(), &mut stdout)
}
