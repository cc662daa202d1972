//! EV charging coordination and charging-station placement.
//!
//! Charging coordination minimizes the valley-filling quadratic
//! `sum_k (D[k] + sum_n w_n[k])^2` over per-EV box and energy-equality
//! constraints, solved centrally by projected gradient or by the
//! aggregator/charger price-broadcast protocol. Placement selects station
//! sites and spot counts on a radial feeder under LinDistFlow voltage and
//! current limits.

mod placement;
mod schedule;

pub use placement::{evcs_place, ConstraintClass, Placement, PlacementProblem};
pub use schedule::{
    centralized_schedule, decentralized_schedule, ev_local_project, ChargingProfile,
    DecentralizedRun,
};

use crate::model::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvError {
    #[error("session {id} infeasible: {reason}")]
    InfeasibleSession { id: usize, reason: String },
    #[error("decentralized protocol did not converge in {iterations} rounds (residual {residual:.3e} kW)")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("projection infeasible: window admits {available} kWh, {required} kWh required")]
    ProjectionInfeasible { required: f64, available: f64 },
    #[error("placement infeasible: binding constraint class {class:?}")]
    PlacementInfeasible { class: placement::ConstraintClass },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One EV charging session. Slots `k_start..=k_end` form the availability
/// window; the energy target is `battery_capacity * (soc_end - soc_start)`
/// battery-side, so grid-side energy is that divided by `efficiency`.
#[derive(Debug, Clone)]
pub struct EvSession {
    pub id: usize,
    pub k_start: usize,
    /// Inclusive final slot.
    pub k_end: usize,
    /// Maximum charging rate, kW.
    pub rate_max: f64,
    /// Charging efficiency in (0, 1].
    pub efficiency: f64,
    /// Battery capacity, kWh.
    pub battery_capacity: f64,
    pub soc_start: f64,
    pub soc_end: f64,
}

impl EvSession {
    /// Grid-side energy the session must absorb, kWh.
    pub fn required_energy_kwh(&self) -> f64 {
        self.battery_capacity * (self.soc_end - self.soc_start) / self.efficiency
    }

    /// Required sum of slot rates, kW (energy divided by the slot length).
    pub fn required_rate_sum(&self, dk_h: f64) -> f64 {
        self.required_energy_kwh() / dk_h
    }

    pub fn validate(&self, horizon_slots: usize, dk_h: f64) -> Result<(), EvError> {
        let fail = |reason: String| {
            Err(EvError::InfeasibleSession {
                id: self.id,
                reason,
            })
        };
        if self.k_start > self.k_end {
            return fail(format!(
                "window start {} after end {}",
                self.k_start, self.k_end
            ));
        }
        if self.k_end >= horizon_slots {
            return fail(format!(
                "window end {} outside horizon {horizon_slots}",
                self.k_end
            ));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return fail("efficiency must be in (0, 1]".to_string());
        }
        if self.rate_max <= 0.0 {
            return fail("rate_max must be > 0".to_string());
        }
        if self.soc_end < self.soc_start {
            return fail("soc_end must be >= soc_start".to_string());
        }
        if !(0.0..=1.0).contains(&self.soc_start) || !(0.0..=1.0).contains(&self.soc_end) {
            return fail("soc values must be in [0, 1]".to_string());
        }
        let window = (self.k_end - self.k_start + 1) as f64;
        let available = self.rate_max * window * dk_h;
        if self.required_energy_kwh() > available + 1e-9 {
            return fail(format!(
                "needs {:.6} kWh but window admits {available:.6} kWh",
                self.required_energy_kwh()
            ));
        }
        Ok(())
    }
}

/// Charging-rate upper bound for slot `k`: `rate_max` inside the window,
/// zero outside.
pub fn charging_bound(session: &EvSession, k: usize) -> f64 {
    if k >= session.k_start && k <= session.k_end {
        session.rate_max
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session() -> EvSession {
        EvSession {
            id: 0,
            k_start: 2,
            k_end: 5,
            rate_max: 3.0,
            efficiency: 0.9,
            battery_capacity: 30.0,
            soc_start: 0.2,
            soc_end: 0.5,
        }
    }

    #[test]
    fn bound_inside_and_outside_window() {
        let s = session();
        assert_eq!(charging_bound(&s, 1), 0.0);
        assert_eq!(charging_bound(&s, 2), 3.0);
        assert_eq!(charging_bound(&s, 5), 3.0);
        assert_eq!(charging_bound(&s, 6), 0.0);
    }

    #[test]
    fn degenerate_window_single_slot() {
        let mut s = session();
        s.k_start = 4;
        s.k_end = 4;
        let nonzero: Vec<usize> = (0..8).filter(|&k| charging_bound(&s, k) > 0.0).collect();
        assert_eq!(nonzero, vec![4]);
    }

    #[test]
    fn required_energy_accounts_for_efficiency() {
        let s = session();
        assert!((s.required_energy_kwh() - 30.0 * 0.3 / 0.9).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_oversized_demand() {
        let mut s = session();
        s.soc_end = 1.0; // 24 kWh battery-side, 26.7 grid-side > 3 kW * 4 h
        assert!(matches!(
            s.validate(8, 1.0),
            Err(EvError::InfeasibleSession { id: 0, .. })
        ));
    }
}
