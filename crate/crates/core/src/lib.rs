//! Conversational robot operation runtime.
//!
//! - [`graphsim`]: deterministic in-process pub/sub middleware (nodes,
//!   topics, services, parameters, logs).
//! - [`toolkit`]: tool specifications, registry, blacklist injection,
//!   catalog rendering and the built-in introspection/utility tools.
//! - [`agent`]: the reasoning/action/observation engine with context
//!   management, parallel tool batches and the safety gate.
//! - [`models`]: scripted and remote model backends.
//! - [`scenarios`]: the demo robots bound to the simulator.

pub mod agent;
pub mod graphsim;
pub mod models;
pub mod scenarios;
pub mod toolkit;
