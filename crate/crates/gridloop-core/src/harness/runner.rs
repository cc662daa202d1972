//! Scenario execution: builds loops from config, schedules them, applies
//! disturbances and attacks at their timestamps, and renders reproducible
//! artifacts.

use std::collections::BTreeMap;
use std::path::Path;

use super::config::ScenarioConfig;
use super::loops::build_loops;
use super::schedule::{schedule, LoopSpec};
use super::trace::{digest_hex, OutputFile, TraceBuffer, TraceRecord};
use super::HarnessError;
use crate::trace_fmt::sig12;

/// Read-only snapshot of shared signals a loop sees during activation.
#[derive(Debug, Default, Clone)]
pub struct SignalBus {
    values: BTreeMap<String, f64>,
}

impl SignalBus {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    fn apply(&mut self, updates: Vec<(String, f64)>) {
        for (k, v) in updates {
            self.values.insert(k, v);
        }
    }
}

/// Where a loop activation writes its outputs: trace records (tagged with
/// the loop id) and signal updates applied to the bus afterwards.
pub struct LoopSink<'a> {
    loop_id: &'a str,
    time_us: u64,
    records: &'a mut Vec<TraceRecord>,
    updates: Vec<(String, f64)>,
}

impl<'a> LoopSink<'a> {
    /// Emits a record at the activation time.
    pub fn emit(&mut self, entity_id: &str, signal: &str, value: f64) {
        self.emit_at(self.time_us, entity_id, signal, value);
    }

    /// Emits a record at an explicit time (planning loops stamp future
    /// slots).
    pub fn emit_at(&mut self, time_us: u64, entity_id: &str, signal: &str, value: f64) {
        self.records.push(TraceRecord {
            time_us,
            loop_id: self.loop_id.to_string(),
            entity_id: entity_id.to_string(),
            signal: signal.to_string(),
            value,
        });
    }

    /// Publishes a shared signal, visible to later activations.
    pub fn publish(&mut self, name: &str, value: f64) {
        self.updates.push((name.to_string(), value));
    }
}

/// One registered control loop. Activation gets exclusive access to the
/// loop's own state and a read-only snapshot of the shared signals.
pub trait ControlLoop {
    fn spec(&self) -> LoopSpec;

    fn activate(&mut self, t_s: f64, bus: &SignalBus, sink: &mut LoopSink) -> Result<(), String>;

    /// Renders the loop's own output files after the run.
    fn finish(&mut self) -> Result<Vec<OutputFile>, String> {
        Ok(Vec::new())
    }

    /// Canonical digest of the terminal state.
    fn state_digest(&self) -> String;
}

#[derive(Debug, Clone)]
pub struct LoopSummary {
    pub loop_id: String,
    pub activations: usize,
    pub records: usize,
    pub digest: String,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub scenario: String,
    pub horizon_s: f64,
    pub loops: Vec<LoopSummary>,
    pub total_records: usize,
}

impl RunSummary {
    /// Plain-text key-value rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scenario = {}\n", self.scenario));
        out.push_str(&format!("horizon_s = {}\n", sig12(self.horizon_s)));
        out.push_str(&format!("loops = {}\n", self.loops.len()));
        out.push_str(&format!("records = {}\n", self.total_records));
        for l in &self.loops {
            out.push_str(&format!(
                "loop.{}.activations = {}\n",
                l.loop_id, l.activations
            ));
            out.push_str(&format!("loop.{}.records = {}\n", l.loop_id, l.records));
            out.push_str(&format!("loop.{}.digest = {}\n", l.loop_id, l.digest));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub summary: RunSummary,
    /// trace.csv, the per-family CSVs, and summary.txt.
    pub files: Vec<OutputFile>,
}

impl RunArtifacts {
    pub fn file(&self, name: &str) -> Option<&OutputFile> {
        self.files.iter().find(|f| f.name == name)
    }

    /// Writes every artifact into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        for f in &self.files {
            std::fs::write(dir.join(&f.name), f.contents.as_bytes())?;
        }
        Ok(())
    }
}

/// Runs one scenario to completion in memory.
///
/// Configuration problems are reported all at once before anything runs;
/// runtime loop failures abort with the loop id and timestamp. Nothing is
/// written to disk here, so a failed run leaves no partial files.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunArtifacts, HarnessError> {
    if cfg.scenario.horizon_s <= 0.0 {
        return Err(HarnessError::Config(vec![
            "scenario.horizon_s must be > 0".to_string()
        ]));
    }
    let mut loops = build_loops(cfg)?;
    let specs: Vec<LoopSpec> = loops.iter().map(|l| l.spec()).collect();
    let activations = schedule(&specs, cfg.scenario.horizon_s)?;

    let mut bus = SignalBus::default();
    let mut records: Vec<TraceRecord> = Vec::new();
    let mut activation_counts = vec![0usize; loops.len()];

    for act in &activations {
        let idx = act.loop_index;
        let spec_id = specs[idx].loop_id.clone();
        let mut sink = LoopSink {
            loop_id: &spec_id,
            time_us: act.time_us,
            records: &mut records,
            updates: Vec::new(),
        };
        loops[idx]
            .activate(act.time_s(), &bus, &mut sink)
            .map_err(|message| HarnessError::Loop {
                loop_id: spec_id.clone(),
                t_s: act.time_s(),
                message,
            })?;
        let updates = sink.updates;
        bus.apply(updates);
        activation_counts[idx] += 1;
    }

    let mut files = Vec::new();
    for (idx, l) in loops.iter_mut().enumerate() {
        files.extend(l.finish().map_err(|message| HarnessError::Loop {
            loop_id: specs[idx].loop_id.clone(),
            t_s: cfg.scenario.horizon_s,
            message,
        })?);
    }

    let mut trace = TraceBuffer::new();
    let total = records.len();
    for r in records {
        trace.push(r);
    }
    let trace_csv = trace.render();

    let loop_summaries: Vec<LoopSummary> = loops
        .iter()
        .enumerate()
        .map(|(idx, l)| {
            let id = specs[idx].loop_id.clone();
            let records = trace.count_for(&id);
            LoopSummary {
                digest: digest_hex(l.state_digest().as_bytes()),
                loop_id: id,
                activations: activation_counts[idx],
                records,
            }
        })
        .collect();
    let summary = RunSummary {
        scenario: cfg.scenario.name.clone(),
        horizon_s: cfg.scenario.horizon_s,
        loops: loop_summaries,
        total_records: total,
    };

    files.insert(
        0,
        OutputFile {
            name: "trace.csv".to_string(),
            contents: trace_csv,
        },
    );
    files.push(OutputFile {
        name: "summary.txt".to_string(),
        contents: summary.render(),
    });

    Ok(RunArtifacts { summary, files })
}
