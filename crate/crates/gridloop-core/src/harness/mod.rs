//! Multi-rate scenario harness.
//!
//! A time-stepped scheduler activates registered loops at their periods,
//! with faster loops running before slower ones at coincident instants so
//! inner loops settle from the perspective of outer ones. Scenario
//! configuration is a tree of key-value sections; traces are CSV with a
//! fixed number format so a seeded run is byte-reproducible.

mod config;
mod loops;
mod registry;
mod runner;
mod schedule;
mod trace;

pub use config::{load_scenario, parse_scenario, ScenarioConfig};
pub use registry::{registry, LoopEntry, LoopRole};
pub use runner::{run_scenario, ControlLoop, RunArtifacts, RunSummary, SignalBus};
pub use schedule::{schedule, Activation, LoopSpec};
pub use trace::{digest_hex, OutputFile, TraceBuffer, TraceRecord};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration invalid:\n{}", .0.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<String>),
    #[error("loop {loop_id} failed at t = {t_s} s: {message}")]
    Loop {
        loop_id: String,
        t_s: f64,
        message: String,
    },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
