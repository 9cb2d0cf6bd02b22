//! Sessions keyed by id. Messages and confirmations on one session are
//! serialized through a busy flag; e-stop, reset and override go straight
//! to the session's safety controls and may arrive while a turn runs.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use teleop_core::agent::{
    AgentConfig, AgentError, AgentEvent, AgentSession, Decision, PendingConfirmation, SessionControls,
    SessionMetrics, TurnOutcome,
};
use teleop_core::graphsim::{GraphConfig, Tick};
use teleop_core::models::{ModelBackend, RemoteBackend, RemoteConfig, Script, ScriptedBackend};
use teleop_core::scenarios::{Robot, Scenario, ScenarioError};

use crate::config::ConfigOverrides;
use crate::transcript::{Input, RecordKind, Transcript, TranscriptRecord};
use crate::GatewayError;

#[derive(Debug, Clone)]
pub enum ModelChoice {
    /// Rules from `ServiceOptions::script`, else the scenario's own script.
    Scripted,
    /// `api_key: None` reads `ROSA_MODEL_API_KEY` when a session is made.
    Remote { config: RemoteConfig, api_key: Option<String> },
}

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub model: ModelChoice,
    pub script: Option<Script>,
    pub agent: AgentConfig,
    /// Directory for `<id>.jsonl` transcript files.
    pub log_dir: Option<PathBuf>,
    /// Scenarios loaded from files; looked up before the bundled ones.
    pub scenarios: Vec<Scenario>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self {
            model: ModelChoice::Scripted,
            script: None,
            agent: AgentConfig::default(),
            log_dir: None,
            scenarios: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub scenario: String,
    #[serde(default)]
    pub config: ConfigOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionStatus {
    pub id: String,
    pub scenario: String,
    pub busy: bool,
    pub estopped: bool,
    pub pending: Option<PendingConfirmation>,
    pub robot: Value,
}

struct Slot {
    id: String,
    scenario: String,
    session: Mutex<AgentSession>,
    busy: AtomicBool,
    controls: SessionControls,
    robot: Robot,
    transcript: Mutex<Transcript>,
}

impl Slot {
    fn record(&self, transcript: &mut Transcript, kind: RecordKind, body: Value) -> Result<(), GatewayError> {
        let now = self.controls.graph().now();
        transcript.append(&TranscriptRecord::new(now, kind, body))?;
        Ok(())
    }

    /// Forward to `emit` and keep the records the transcript wants.
    fn tee<'a>(&'a self, emit: &'a mut dyn FnMut(&AgentEvent)) -> impl FnMut(AgentEvent) + 'a {
        move |event| {
            if let Some(rec) = TranscriptRecord::from_event(&event, self.controls.graph().now()) {
                // A failed mirror write must not abort a turn that is moving
                // the robot; the in-memory copy is still kept.
                let _ = self.transcript.lock().append(&rec);
            }
            emit(&event);
        }
    }

    fn finish(
        &self,
        result: Result<TurnOutcome, AgentError>,
        emit: &mut dyn FnMut(&AgentEvent),
    ) -> Result<TurnOutcome, GatewayError> {
        match result {
            Ok(out) => Ok(out),
            Err(AgentError::NoPendingConfirmation) => Err(GatewayError::NoPendingConfirmation(self.id.clone())),
            Err(e) => {
                let event = AgentEvent::Error { message: e.to_string() };
                self.tee(emit)(event);
                Err(e.into())
            }
        }
    }
}

/// Exclusive right to run one turn on a session. Dropping it frees the
/// session for the next message.
pub struct TurnPermit {
    slot: Arc<Slot>,
}

impl Drop for TurnPermit {
    fn drop(&mut self) {
        self.slot.busy.store(false, Ordering::Release);
    }
}

impl TurnPermit {
    pub fn session_id(&self) -> &str {
        &self.slot.id
    }

    pub fn message(
        self,
        text: &str,
        language: Option<&str>,
        emit: &mut dyn FnMut(&AgentEvent),
    ) -> Result<TurnOutcome, GatewayError> {
        let slot = &self.slot;
        slot.record(&mut slot.transcript.lock(), RecordKind::User, json!({"text": text, "language": language}))?;
        let result = slot.session.lock().run_turn(text, language, &mut slot.tee(emit));
        slot.finish(result, emit)
    }

    pub fn confirm(self, decision: Decision, emit: &mut dyn FnMut(&AgentEvent)) -> Result<TurnOutcome, GatewayError> {
        let slot = &self.slot;
        let pending = slot
            .controls
            .pending()
            .ok_or_else(|| GatewayError::NoPendingConfirmation(slot.id.clone()))?;
        slot.record(
            &mut slot.transcript.lock(),
            RecordKind::Safety,
            json!({"action": decision, "call_id": pending.call_id, "tool": pending.tool}),
        )?;
        let result = slot.session.lock().confirm_action(decision, &mut slot.tee(emit));
        slot.finish(result, emit)
    }
}

#[derive(Debug, Default)]
pub struct SessionService {
    options: ServiceOptions,
    sessions: RwLock<BTreeMap<String, Arc<Slot>>>,
    counter: AtomicU64,
}

impl std::fmt::Debug for Slot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Slot").field("id", &self.id).field("scenario", &self.scenario).finish()
    }
}

impl SessionService {
    pub fn new(options: ServiceOptions) -> Self {
        Self {
            options,
            sessions: RwLock::default(),
            counter: AtomicU64::new(0),
        }
    }

    pub fn options(&self) -> &ServiceOptions {
        &self.options
    }

    fn scenario(&self, name: &str) -> Result<Scenario, GatewayError> {
        if let Some(s) = self.options.scenarios.iter().find(|s| s.name() == name) {
            return Ok(s.clone());
        }
        Scenario::builtin(name).map_err(|e| match e {
            ScenarioError::UnknownScenario(n) => GatewayError::UnknownScenario(n),
            other => other.into(),
        })
    }

    fn backend(&self, scenario: &Scenario) -> Result<Box<dyn ModelBackend>, GatewayError> {
        match &self.options.model {
            ModelChoice::Remote { config, api_key: None } => Ok(Box::new(RemoteBackend::new(config.clone()))),
            ModelChoice::Remote { config, api_key } => {
                Ok(Box::new(RemoteBackend::with_key(config.clone(), api_key.clone())))
            }
            ModelChoice::Scripted => {
                let script = match &self.options.script {
                    Some(s) => s.clone(),
                    None => scenario.default_script()?.ok_or_else(|| {
                        GatewayError::InvalidConfig(format!("scenario {} has no bundled script", scenario.name()))
                    })?,
                };
                Ok(Box::new(ScriptedBackend::new(script)))
            }
        }
    }

    pub fn create_session(&self, request: &CreateSession) -> Result<String, GatewayError> {
        let scenario = self.scenario(&request.scenario)?;
        let config = request.config.apply(self.options.agent)?;
        let backend = self.backend(&scenario)?;
        let n = self.counter.fetch_add(1, Ordering::SeqCst) + 1;
        let id = format!("sess-{n:04}");
        let (session, robot) = scenario
            .instantiate(GraphConfig::default())?
            .into_session(backend, config)
            .map_err(|e| match e {
                AgentError::Config(c) => GatewayError::InvalidConfig(c.to_string()),
                other => other.into(),
            })?;
        let mut transcript = match &self.options.log_dir {
            Some(dir) => Transcript::with_file(dir.join(format!("{id}.jsonl")))?,
            None => Transcript::in_memory(),
        };
        let controls = session.controls().clone();
        transcript.append(&TranscriptRecord::new(
            controls.graph().now(),
            RecordKind::Session,
            json!({"id": id, "scenario": scenario.name(), "config": config}),
        ))?;
        let slot = Arc::new(Slot {
            id: id.clone(),
            scenario: scenario.name().to_string(),
            session: Mutex::new(session),
            busy: AtomicBool::new(false),
            controls,
            robot,
            transcript: Mutex::new(transcript),
        });
        self.sessions.write().insert(id.clone(), slot);
        Ok(id)
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, GatewayError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| GatewayError::UnknownSession(id.to_string()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.read().keys().cloned().collect()
    }

    /// Claim the session for one message or confirmation.
    pub fn begin_turn(&self, id: &str) -> Result<TurnPermit, GatewayError> {
        let slot = self.slot(id)?;
        if slot
            .busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .is_err()
        {
            return Err(GatewayError::SessionBusy(id.to_string()));
        }
        Ok(TurnPermit { slot })
    }

    pub fn post_message(
        &self,
        id: &str,
        text: &str,
        language: Option<&str>,
        emit: &mut dyn FnMut(&AgentEvent),
    ) -> Result<TurnOutcome, GatewayError> {
        self.begin_turn(id)?.message(text, language, emit)
    }

    pub fn confirm(
        &self,
        id: &str,
        decision: Decision,
        emit: &mut dyn FnMut(&AgentEvent),
    ) -> Result<TurnOutcome, GatewayError> {
        self.begin_turn(id)?.confirm(decision, emit)
    }

    /// Latch the e-stop. The safety record is written before any tool
    /// record that lands after the acknowledgement tick.
    pub fn estop(&self, id: &str) -> Result<Tick, GatewayError> {
        let slot = self.slot(id)?;
        let mut transcript = slot.transcript.lock();
        let ack = slot.controls.estop();
        transcript.append(&TranscriptRecord::new(ack, RecordKind::Safety, json!({"action": "estop"})))?;
        Ok(ack)
    }

    pub fn reset_estop(&self, id: &str) -> Result<(), GatewayError> {
        let slot = self.slot(id)?;
        let mut transcript = slot.transcript.lock();
        slot.controls.reset_estop();
        slot.record(&mut transcript, RecordKind::Safety, json!({"action": "reset"}))
    }

    /// Run an uplink tool as the operator.
    pub fn human_override(&self, id: &str, tool: &str, args: &Value) -> Result<Value, GatewayError> {
        let slot = self.slot(id)?;
        let result = slot.controls.human_override(tool, args);
        let (ok, text) = match &result {
            Ok(r) => (true, r.rendered_text.clone()),
            Err(e) => (false, e.to_string()),
        };
        slot.record(
            &mut slot.transcript.lock(),
            RecordKind::Override,
            json!({"tool": tool, "args": args, "ok": ok, "text": text}),
        )?;
        let r = result?;
        Ok(json!({"ok": true, "text": r.rendered_text, "payload": r.payload}))
    }

    pub fn transcript(&self, id: &str) -> Result<String, GatewayError> {
        Ok(self.slot(id)?.transcript.lock().export())
    }

    pub fn metrics(&self, id: &str) -> Result<SessionMetrics, GatewayError> {
        Ok(self.slot(id)?.controls.metrics())
    }

    pub fn status(&self, id: &str) -> Result<SessionStatus, GatewayError> {
        let slot = self.slot(id)?;
        Ok(SessionStatus {
            id: slot.id.clone(),
            scenario: slot.scenario.clone(),
            busy: slot.busy.load(Ordering::Acquire),
            estopped: slot.controls.safety().is_estopped(),
            pending: slot.controls.pending(),
            robot: slot.robot.snapshot(),
        })
    }

    /// Feed one recovered operator input to a session. Tool and turn
    /// failures are part of the replayed record, not errors here.
    pub fn apply(&self, id: &str, input: &Input) -> Result<(), GatewayError> {
        let mut sink = |_: &AgentEvent| {};
        let outcome = match input {
            Input::User { text, language } => self.post_message(id, text, language.as_deref(), &mut sink).map(drop),
            Input::Decision(d) => self.confirm(id, *d, &mut sink).map(drop),
            Input::Estop => self.estop(id).map(drop),
            Input::Reset => self.reset_estop(id),
            Input::Override { tool, args } => self.human_override(id, tool, args).map(drop),
        };
        match outcome {
            Err(GatewayError::Agent(_)) | Err(GatewayError::Tool(_)) => Ok(()),
            other => other,
        }
    }

    /// Drive a fresh session through a transcript's operator inputs and
    /// return the new session's id.
    pub fn replay(&self, transcript: &str) -> Result<String, GatewayError> {
        let records = crate::transcript::parse(transcript).map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        let head = records
            .iter()
            .find(|r| r.kind == RecordKind::Session)
            .ok_or_else(|| GatewayError::InvalidConfig("transcript has no session record".into()))?;
        let scenario = head.body["scenario"].as_str().unwrap_or_default().to_string();
        let config: ConfigOverrides = serde_json::from_value(head.body["config"].clone()).unwrap_or_default();
        let id = self.create_session(&CreateSession { scenario, config })?;
        for input in crate::transcript::inputs(&records) {
            self.apply(&id, &input)?;
        }
        Ok(id)
    }
}
