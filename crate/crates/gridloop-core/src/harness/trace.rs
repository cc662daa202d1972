//! Trace records and byte-reproducible file output.

use crate::trace_fmt::{csv_line, sig12};

/// One timestamped signal sample from a loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time_us: u64,
    pub loop_id: String,
    pub entity_id: String,
    pub signal: String,
    pub value: f64,
}

impl TraceRecord {
    pub fn time_s(&self) -> f64 {
        self.time_us as f64 / 1e6
    }
}

/// Collects records during a run and renders the trace CSV. Records sort
/// stably by time, so coincident records keep their emission order.
#[derive(Debug, Default)]
pub struct TraceBuffer {
    records: Vec<TraceRecord>,
}

impl TraceBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, rec: TraceRecord) {
        self.records.push(rec);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn count_for(&self, loop_id: &str) -> usize {
        self.records.iter().filter(|r| r.loop_id == loop_id).count()
    }

    /// Renders the `time_s,loop_id,entity_id,signal,value` CSV.
    pub fn render(&mut self) -> String {
        self.records.sort_by_key(|r| r.time_us);
        let mut out = String::from("time_s,loop_id,entity_id,signal,value\n");
        for r in &self.records {
            out.push_str(&csv_line(&[
                sig12(r.time_s()),
                r.loop_id.clone(),
                r.entity_id.clone(),
                r.signal.clone(),
                sig12(r.value),
            ]));
        }
        out
    }
}

/// A rendered output file awaiting write-out.
#[derive(Debug, Clone)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

/// FNV-1a over the bytes, as a fixed-width hex digest for run summaries.
pub fn digest_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    format!("{h:016x}")
}
