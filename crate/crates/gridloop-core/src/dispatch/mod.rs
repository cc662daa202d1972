//! Market-timescale loops: economic dispatch, unit commitment, and
//! scenario-based risk-aware dispatch.
//!
//! All three reduce to small LPs over piecewise-linear generator costs with
//! DC power flow line limits expressed through PTDFs. Real-time dispatch
//! cadence is 300 s; unit commitment covers up to 24 hourly slots over at
//! most 10 units, solved to global optimality.

mod ed;
mod scenario;
mod uc;

pub use ed::{economic_dispatch, DispatchResult};
pub use scenario::{scenario_dispatch, DEFAULT_VOLL};
pub use uc::{unit_commitment, CommitmentSchedule};

use crate::model::ModelError;
use thiserror::Error;

/// Real-time economic dispatch cadence, seconds.
pub const ED_PERIOD_S: f64 = 300.0;

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("infeasible dispatch: {constraint}")]
    Infeasible { constraint: String },
    #[error("no feasible commitment for hour {hour}")]
    NoFeasibleCommitment { hour: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One marginal-cost segment: `mw` of width at `price` $/MWh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSegment {
    pub mw: f64,
    pub price: f64,
}

/// A dispatchable unit. Segments partition `[0, p_max]` with non-decreasing
/// prices (convex cost); `p_min` is the minimum stable output while
/// committed. There is no separate no-load cost; fold it into `startup_cost`
/// or the first segment.
#[derive(Debug, Clone)]
pub struct Generator {
    pub id: usize,
    pub bus: usize,
    pub segments: Vec<CostSegment>,
    pub p_min: f64,
    pub p_max: f64,
    pub startup_cost: f64,
    pub committed: bool,
}

impl Generator {
    /// Single-segment unit with one marginal price.
    pub fn single_cost(id: usize, bus: usize, price: f64, p_min: f64, p_max: f64) -> Self {
        Self {
            id,
            bus,
            segments: vec![CostSegment { mw: p_max, price }],
            p_min,
            p_max,
            startup_cost: 0.0,
            committed: true,
        }
    }

    pub fn with_startup_cost(mut self, cost: f64) -> Self {
        self.startup_cost = cost;
        self
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        let fail = |msg: String| Err(DispatchError::InvalidInput(msg));
        if !(0.0 <= self.p_min && self.p_min <= self.p_max) {
            return fail(format!("unit {}: need 0 <= p_min <= p_max", self.id));
        }
        if self.segments.is_empty() || self.segments.len() > 3 {
            return fail(format!("unit {}: 1..=3 cost segments required", self.id));
        }
        let mut last = f64::NEG_INFINITY;
        let mut width = 0.0;
        for seg in &self.segments {
            if seg.mw < 0.0 {
                return fail(format!("unit {}: segment width must be >= 0", self.id));
            }
            if seg.price < last {
                return fail(format!(
                    "unit {}: segment prices must be non-decreasing",
                    self.id
                ));
            }
            last = seg.price;
            width += seg.mw;
        }
        if (width - self.p_max).abs() > 1e-6 * self.p_max.max(1.0) {
            return fail(format!(
                "unit {}: segments must cover [0, p_max] exactly ({} vs {})",
                self.id, width, self.p_max
            ));
        }
        Ok(())
    }

    /// Operating cost of producing `mw`, integrating the marginal curve.
    pub fn energy_cost(&self, mw: f64) -> f64 {
        let mut remaining = mw;
        let mut cost = 0.0;
        for seg in &self.segments {
            let take = remaining.min(seg.mw).max(0.0);
            cost += take * seg.price;
            remaining -= take;
        }
        cost
    }
}

pub(crate) fn validate_units(gens: &[Generator]) -> Result<(), DispatchError> {
    for g in gens {
        g.validate()?;
    }
    let mut ids: Vec<usize> = gens.iter().map(|g| g.id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != gens.len() {
        return Err(DispatchError::InvalidInput(
            "duplicate generator ids".to_string(),
        ));
    }
    Ok(())
}

/// Per-bus demand in MW. The bus index matches the network.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSpec {
    pub bus_mw: Vec<f64>,
}

impl DemandSpec {
    pub fn new(bus_mw: Vec<f64>) -> Self {
        Self { bus_mw }
    }

    /// All demand at a single bus.
    pub fn at_bus(n_buses: usize, bus: usize, mw: f64) -> Self {
        let mut bus_mw = vec![0.0; n_buses];
        bus_mw[bus] = mw;
        Self { bus_mw }
    }

    pub fn total(&self) -> f64 {
        self.bus_mw.iter().sum()
    }
}
