use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::graphsim::{Graph, Tick};
use crate::models::{validate_model, ModelBackend, ModelError, ModelRequest, MIN_CONTEXT_TOKENS};
use crate::toolkit::{Origin, ParamType, RegistryError, ToolContext, ToolError, ToolRegistry, ToolResult, ToolSpec};

use super::context::{assemble_context, ContextError};
use super::executor::{CallRecord, Executor};
use super::message::{ChatHistory, Message, Role, Scratchpad};
use super::parse::{parse_model_output, ModelOutput, ToolCall};
use super::safety::{PendingConfirmation, SafetyState};
use super::trace::{
    ActionRecord, AgentEvent, ObservationRecord, Phase, SessionMetrics, StepTrace, TurnOutcome, TurnStatus,
};

pub const SCRATCHPAD_TOOL: &str = "set_scratchpad";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub max_iterations: u32,
    pub context_budget: usize,
    pub require_confirmation_for_uplink: bool,
    pub scratchpad_budget: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            context_budget: MIN_CONTEXT_TOKENS,
            require_confirmation_for_uplink: true,
            scratchpad_budget: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("context_budget {0} is below the minimum of {MIN_CONTEXT_TOKENS} tokens")]
    ContextBudgetTooSmall(usize),
    #[error("max_iterations must be positive")]
    ZeroIterations,
    #[error("scratchpad_budget {scratchpad} must be smaller than context_budget {context}")]
    ScratchpadTooLarge { scratchpad: usize, context: usize },
    #[error("a robot-bound session needs at least one system prompt")]
    NoSystemPrompts,
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.context_budget < MIN_CONTEXT_TOKENS {
            return Err(ConfigError::ContextBudgetTooSmall(self.context_budget));
        }
        if self.max_iterations == 0 {
            return Err(ConfigError::ZeroIterations);
        }
        if self.scratchpad_budget >= self.context_budget {
            return Err(ConfigError::ScratchpadTooLarge {
                scratchpad: self.scratchpad_budget,
                context: self.context_budget,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("unsuitable model: {0}")]
    UnsuitableModel(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no pending confirmation")]
    NoPendingConfirmation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Approve,
    Deny,
}

/// Operator controls that may be used from any thread, including while a
/// turn is running.
#[derive(Debug, Clone)]
pub struct SessionControls {
    graph: Graph,
    safety: Arc<SafetyState>,
    registry: Arc<ToolRegistry>,
    metrics: Arc<Mutex<SessionMetrics>>,
}

impl SessionControls {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn safety(&self) -> &Arc<SafetyState> {
        &self.safety
    }

    pub fn registry(&self) -> &Arc<ToolRegistry> {
        &self.registry
    }

    pub fn metrics(&self) -> SessionMetrics {
        *self.metrics.lock()
    }

    pub fn pending(&self) -> Option<PendingConfirmation> {
        self.safety.pending()
    }

    /// Latch the e-stop. In-flight uplink tools stop at their next
    /// checkpoint. Returns the acknowledgement tick.
    pub fn estop(&self) -> Tick {
        let tick = self.safety.estop(&self.graph);
        let mut m = self.metrics.lock();
        m.estops += 1;
        m.interventions += 1;
        tick
    }

    pub fn reset_estop(&self) {
        self.safety.reset_estop(&self.graph);
    }

    /// Run an uplink tool directly, ahead of any queued agent command.
    pub fn human_override(&self, tool: &str, args: &Value) -> Result<ToolResult, ToolError> {
        let spec = self
            .registry
            .spec(tool)
            .ok_or_else(|| ToolError::UnknownTool(tool.to_string()))?;
        if !spec.is_uplink() {
            return Err(ToolError::ArgValidation {
                tool: tool.to_string(),
                violations: vec!["overrides address uplink tools only".into()],
            });
        }
        self.registry.validate_args(tool, args)?;
        if self.safety.is_estopped() {
            self.metrics.lock().incidents += 1;
            return Err(ToolError::EStopped(tool.to_string()));
        }
        let result = {
            let _channel = self.safety.mux().acquire_human();
            self.safety.set_override_active(true);
            let ctx = ToolContext::new(self.graph.clone(), self.safety.clone(), "override", Origin::Human);
            let result = self.registry.invoke(&ctx, tool, args);
            self.safety.set_override_active(false);
            result
        };
        let mut m = self.metrics.lock();
        m.overrides += 1;
        m.interventions += 1;
        if result.is_err() {
            m.incidents += 1;
        }
        result
    }

    fn bump(&self, f: impl FnOnce(&mut SessionMetrics)) {
        f(&mut self.metrics.lock());
    }
}

#[derive(Debug, Clone)]
struct TurnState {
    iteration: u32,
    language: Option<String>,
    rejected: bool,
}

/// A robot-bound conversation: history, scratchpad, backend and the loop.
pub struct AgentSession {
    controls: SessionControls,
    backend: Box<dyn ModelBackend>,
    config: AgentConfig,
    rsps: Vec<String>,
    history: ChatHistory,
    scratchpad: Arc<Mutex<Scratchpad>>,
    suspended: Option<TurnState>,
    last_request: Option<ModelRequest>,
}

impl std::fmt::Debug for AgentSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AgentSession")
            .field("backend", &self.backend.name())
            .field("config", &self.config)
            .field("history_len", &self.history.len())
            .finish()
    }
}

impl AgentSession {
    pub fn new(
        graph: Graph,
        mut registry: ToolRegistry,
        rsps: Vec<String>,
        backend: Box<dyn ModelBackend>,
        config: AgentConfig,
    ) -> Result<Self, AgentError> {
        config.validate()?;
        if rsps.is_empty() {
            return Err(ConfigError::NoSystemPrompts.into());
        }
        validate_model(backend.capabilities()).map_err(AgentError::UnsuitableModel)?;
        let scratchpad = Arc::new(Mutex::new(Scratchpad::new(config.scratchpad_budget)));
        let pad = scratchpad.clone();
        registry.register(
            ToolSpec::downlink(
                SCRATCHPAD_TOOL,
                "Replace the scratchpad with your current plan. It is shown to you on every step; an empty text clears it.",
            )
            .required("text", ParamType::String, "The new scratchpad contents."),
            move |ctx, args| {
                let text = args["text"].as_str().unwrap_or_default();
                let truncated = pad.lock().set(text, ctx.graph().now());
                Ok(json!({"value": "scratchpad updated", "truncated": truncated})
                    .as_object()
                    .cloned()
                    .unwrap_or_default())
            },
        )?;
        Ok(Self {
            controls: SessionControls {
                graph,
                safety: Arc::new(SafetyState::new()),
                registry: Arc::new(registry),
                metrics: Arc::new(Mutex::new(SessionMetrics::default())),
            },
            backend,
            config,
            rsps,
            history: ChatHistory::new(),
            scratchpad,
            suspended: None,
            last_request: None,
        })
    }

    pub fn controls(&self) -> &SessionControls {
        &self.controls
    }

    pub fn graph(&self) -> &Graph {
        &self.controls.graph
    }

    pub fn registry(&self) -> &ToolRegistry {
        &self.controls.registry
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn system_prompts(&self) -> &[String] {
        &self.rsps
    }

    pub fn history(&self) -> &ChatHistory {
        &self.history
    }

    pub fn scratchpad(&self) -> Scratchpad {
        self.scratchpad.lock().clone()
    }

    pub fn metrics(&self) -> SessionMetrics {
        self.controls.metrics()
    }

    pub fn last_request(&self) -> Option<&ModelRequest> {
        self.last_request.as_ref()
    }

    pub fn is_awaiting_confirmation(&self) -> bool {
        self.suspended.is_some()
    }

    pub fn estop(&self) -> Tick {
        self.controls.estop()
    }

    pub fn human_override(&self, tool: &str, args: &Value) -> Result<ToolResult, ToolError> {
        self.controls.human_override(tool, args)
    }

    /// Forget the conversation; robot state and e-stop are untouched.
    pub fn reset(&mut self) {
        self.history.clear_conversation();
        self.scratchpad.lock().clear(self.graph().now());
        self.controls.safety.take_pending();
        self.suspended = None;
    }

    /// Handle one user message. A call still waiting for confirmation is
    /// dropped: the new message supersedes it.
    pub fn run_turn(
        &mut self,
        text: &str,
        language: Option<&str>,
        emit: &mut dyn FnMut(AgentEvent),
    ) -> Result<TurnOutcome, AgentError> {
        self.controls.safety.take_pending();
        self.suspended = None;
        self.controls.bump(|m| m.turns += 1);
        self.push(Role::User, text);
        let state = TurnState {
            iteration: 0,
            language: language.map(str::to_string),
            rejected: false,
        };
        self.drive(state, Vec::new(), emit)
    }

    /// Resolve the held call and resume the suspended turn.
    pub fn confirm_action(
        &mut self,
        decision: Decision,
        emit: &mut dyn FnMut(AgentEvent),
    ) -> Result<TurnOutcome, AgentError> {
        let pending = self
            .controls
            .safety
            .take_pending()
            .ok_or(AgentError::NoPendingConfirmation)?;
        let mut state = self.suspended.take().unwrap_or(TurnState {
            iteration: 0,
            language: None,
            rejected: false,
        });
        let call = ToolCall::new(pending.call_id, 0, pending.tool, pending.args);
        let record = match decision {
            Decision::Approve => {
                self.controls.bump(|m| {
                    m.approvals += 1;
                    m.interventions += 1;
                });
                self.executor().run_approved(&call)
            }
            Decision::Deny => {
                self.controls.bump(|m| {
                    m.denials += 1;
                    m.interventions += 1;
                });
                let now = self.graph().now();
                CallRecord {
                    outcome: Err(ToolError::Denied(call.name.clone())),
                    call: call.clone(),
                    group: 0,
                    start_tick: now,
                    end_tick: now,
                    uplink: true,
                }
            }
        };
        let reasoning = match decision {
            Decision::Approve => format!("Operator approved {}.", call.name),
            Decision::Deny => format!("Operator denied {}.", call.name),
        };
        let trace = self.record_step(&mut state, Phase::Confirmation, reasoning, &[record], emit);
        self.drive(state, vec![trace], emit)
    }

    fn executor(&self) -> Executor<'_> {
        Executor {
            registry: &self.controls.registry,
            graph: &self.controls.graph,
            safety: &self.controls.safety,
            require_confirmation: self.config.require_confirmation_for_uplink,
        }
    }

    fn push(&mut self, role: Role, content: &str) {
        let msg = Message::new(role, content, self.graph().now());
        self.history
            .push(msg)
            .expect("the logical clock is monotone and roles are never system");
    }

    fn drive(
        &mut self,
        mut state: TurnState,
        mut traces: Vec<StepTrace>,
        emit: &mut dyn FnMut(AgentEvent),
    ) -> Result<TurnOutcome, AgentError> {
        loop {
            if state.iteration >= self.config.max_iterations {
                let answer = format!(
                    "Iteration limit reached: stopped after {} iterations without a final answer.",
                    self.config.max_iterations
                );
                return Ok(self.finish(answer, TurnStatus::IterationLimit, traces, emit));
            }
            let output = match self.ask(&state) {
                Ok(o) => o,
                Err(e) => {
                    emit(AgentEvent::Error { message: e.to_string() });
                    return Err(e);
                }
            };
            match output {
                ModelOutput::FinalAnswer(text) => {
                    if let Some(p) = self.controls.safety.pending() {
                        self.suspended = Some(state);
                        emit(AgentEvent::Confirmation {
                            call_id: p.call_id,
                            tool: p.tool,
                            args: p.args,
                        });
                        return Ok(self.finish(text, TurnStatus::AwaitingConfirmation, traces, emit));
                    }
                    if !state.rejected {
                        self.controls.bump(|m| m.tasks_completed += 1);
                    }
                    return Ok(self.finish(text, TurnStatus::Completed, traces, emit));
                }
                ModelOutput::Malformed(diag) => {
                    let answer = format!("The model reply could not be understood: {diag}");
                    return Ok(self.finish(answer, TurnStatus::MalformedOutput, traces, emit));
                }
                ModelOutput::Batch(batch) => {
                    state.iteration += 1;
                    let iteration = state.iteration;
                    self.push(Role::Assistant, &batch.to_wire());
                    let reasoning = batch.reasoning.clone().unwrap_or_default();
                    emit(AgentEvent::Reasoning {
                        iteration,
                        text: reasoning.clone(),
                    });
                    for (gi, group) in batch.groups.iter().enumerate() {
                        for c in group {
                            emit(AgentEvent::Action {
                                iteration,
                                id: c.id.clone(),
                                tool: c.name.clone(),
                                args: c.args.clone(),
                                group: gi,
                            });
                        }
                    }
                    let records = self.executor().execute_batch(&batch, &mut |group| {
                        for r in group {
                            emit_observation(emit, iteration, r);
                        }
                    });
                    let trace = self.finish_step(&mut state, Phase::Loop, reasoning, &records, emit);
                    traces.push(trace);
                }
            }
        }
    }

    /// Emit the events for a step whose actions and observations have not
    /// been streamed yet, then book it.
    fn record_step(
        &mut self,
        state: &mut TurnState,
        phase: Phase,
        reasoning: String,
        records: &[CallRecord],
        emit: &mut dyn FnMut(AgentEvent),
    ) -> StepTrace {
        emit(AgentEvent::Reasoning {
            iteration: state.iteration,
            text: reasoning.clone(),
        });
        for r in records {
            emit(AgentEvent::Action {
                iteration: state.iteration,
                id: r.call.id.clone(),
                tool: r.call.name.clone(),
                args: r.call.args.clone(),
                group: r.group,
            });
        }
        for r in records {
            emit_observation(emit, state.iteration, r);
        }
        self.finish_step(state, phase, reasoning, records, emit)
    }

    /// Feed observations back into history, update counters and build
    /// the trace.
    fn finish_step(
        &mut self,
        state: &mut TurnState,
        phase: Phase,
        reasoning: String,
        records: &[CallRecord],
        emit: &mut dyn FnMut(AgentEvent),
    ) -> StepTrace {
        for r in records {
            self.push(Role::Tool, &r.tool_message());
            if let Err(e) = &r.outcome {
                if !e.is_hold() {
                    self.controls.bump(|m| m.incidents += 1);
                }
                if e.is_safety_rejection() {
                    state.rejected = true;
                }
            }
            if r.uplink && r.outcome.as_ref().err().is_none_or(|e| !e.is_hold()) {
                emit(AgentEvent::Tool {
                    id: r.call.id.clone(),
                    tool: r.call.name.clone(),
                    ok: r.ok(),
                    text: r.text(),
                    tick: r.end_tick,
                });
            }
        }
        let trace = StepTrace {
            iteration: state.iteration,
            phase,
            reasoning,
            actions: records
                .iter()
                .map(|r| ActionRecord {
                    id: r.call.id.clone(),
                    tool: r.call.name.clone(),
                    args: r.call.args.clone(),
                    group: r.group,
                })
                .collect(),
            observations: records
                .iter()
                .map(|r| ObservationRecord {
                    id: r.call.id.clone(),
                    tool: r.call.name.clone(),
                    ok: r.ok(),
                    text: r.text(),
                    start_tick: r.start_tick,
                    end_tick: r.end_tick,
                })
                .collect(),
        };
        emit(AgentEvent::Step { trace: trace.clone() });
        trace
    }

    fn finish(
        &mut self,
        answer: String,
        status: TurnStatus,
        traces: Vec<StepTrace>,
        emit: &mut dyn FnMut(AgentEvent),
    ) -> TurnOutcome {
        self.push(Role::Assistant, &answer);
        emit(AgentEvent::Final {
            text: answer.clone(),
            status,
        });
        TurnOutcome { answer, status, traces }
    }

    fn build_request(&self, state: &TurnState) -> Result<ModelRequest, AgentError> {
        let mut system = self.rsps.clone();
        if let Some(lang) = &state.language {
            system.push(format!("respond in {lang}"));
        }
        let pad = self.scratchpad.lock().text().to_string();
        let ctx = assemble_context(
            &system,
            &self.controls.registry.render_catalog(),
            &pad,
            self.history.messages(),
            self.config.context_budget,
        )?;
        Ok(ModelRequest {
            messages: ctx.messages,
            tools: self.controls.registry.catalog_entries(),
        })
    }

    /// One model query. Unparseable output gets one re-prompt carrying the
    /// parse diagnostic.
    fn ask(&mut self, state: &TurnState) -> Result<ModelOutput, AgentError> {
        let request = self.build_request(state)?;
        let first = self.backend.complete(&request)?;
        self.last_request = Some(request);
        let diag = match parse_model_output(&first.content) {
            ModelOutput::Malformed(d) => d,
            other => return Ok(other),
        };
        let mut retry = self.last_request.clone().expect("just stored");
        let now = self.graph().now();
        retry.messages.push(Message::new(Role::Assistant, first.content, now));
        retry.messages.push(Message::new(
            Role::User,
            format!(
                "Your previous reply could not be parsed ({diag}). Answer in plain text or with a valid tool_calls object."
            ),
            now,
        ));
        let second = self.backend.complete(&retry)?;
        Ok(parse_model_output(&second.content))
    }
}

fn emit_observation(emit: &mut dyn FnMut(AgentEvent), iteration: u32, r: &CallRecord) {
    emit(AgentEvent::Observation {
        iteration,
        id: r.call.id.clone(),
        tool: r.call.name.clone(),
        ok: r.ok(),
        text: r.text(),
    });
}
