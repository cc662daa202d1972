//! Layer 1: LP relaxation of the fleet scheduling problem.
//!
//! Binary on/off variables relax to `u in [0, 1]`. Temperatures are affine
//! in `u`, so they are eliminated: each comfort bound becomes a dense row
//! over the house's own control variables. A tiny increasing-in-time cost
//! perturbation resolves price ties toward the earliest cheap slots.

use super::{DemandError, ThermalHouse};
use crate::lp::{solve_lp, LpError, LpProblem, Sense};

/// Tie-break perturbation per slot index, $ per unit of `u`. Sits above the
/// simplex optimality tolerance (1e-7) and far below any real price step.
const TIE_EPS: f64 = 1e-5;

/// Relaxed fleet schedule and the reference it implies.
#[derive(Debug, Clone)]
pub struct FleetPlan {
    /// `u[house][slot]` in [0, 1].
    pub u: Vec<Vec<f64>>,
    /// Total-power reference per slot, kW.
    pub p_ref_total: Vec<f64>,
    /// Energy budget the plan delivers, kWh.
    pub energy_budget: f64,
    /// Purchase cost at the forecast prices, $.
    pub cost: f64,
}

/// Solves the relaxed schedule: minimize energy purchase cost subject to
/// per-slot comfort bounds (hard), the Euler-discretized thermal dynamics,
/// and an exact energy budget over the horizon.
///
/// `price[t]` is $/kWh, `ambient[t]` degC per slot, `slot_h` the slot
/// length in hours.
pub fn lp_relaxed_schedule(
    houses: &[ThermalHouse],
    price: &[f64],
    ambient: &[f64],
    energy_budget_kwh: f64,
    slot_h: f64,
) -> Result<FleetPlan, DemandError> {
    let horizon = price.len();
    if horizon == 0 || ambient.len() != horizon {
        return Err(DemandError::InvalidInput(
            "price and ambient must cover the same non-empty horizon".to_string(),
        ));
    }
    if houses.is_empty() {
        return Err(DemandError::InvalidInput("at least one house".to_string()));
    }
    if slot_h <= 0.0 {
        return Err(DemandError::InvalidInput("slot_h must be > 0".to_string()));
    }
    for h in houses {
        h.validate()?;
        if slot_h > 1.0 / h.alpha {
            return Err(DemandError::InvalidInput(format!(
                "house {}: slot length {} h too large for alpha {}",
                h.id, slot_h, h.alpha
            )));
        }
    }
    comfort_precheck(houses, ambient, slot_h)?;

    let n = houses.len();
    let var = |h: usize, t: usize| h * horizon + t;
    let mut lp = LpProblem::new(n * horizon);
    for h in 0..n {
        for t in 0..horizon {
            lp.set_bounds(var(h, t), 0.0, 1.0);
            let energy = houses[h].ac_power * slot_h;
            lp.set_cost(var(h, t), energy * price[t] + TIE_EPS * (t as f64 + 1.0));
        }
    }

    // theta[h][t+1] = decay * theta[t] + slot_h*alpha*ambient[t] - gain*u[t];
    // eliminating theta gives theta[h][t] = free[h][t] - sum_tau g^(t-1-tau) gain u[tau]
    for (h, house) in houses.iter().enumerate() {
        let decay = 1.0 - slot_h * house.alpha;
        let gain = slot_h * house.cooling_rate();
        let mut free = house.temp;
        for t in 1..=horizon {
            free = decay * free + slot_h * house.alpha * ambient[t - 1];
            // influence of u[tau] on theta at boundary t: -gain * decay^(t-1-tau)
            let coeffs: Vec<(usize, f64)> = (0..t)
                .map(|tau| (var(h, tau), -gain * decay.powi((t - 1 - tau) as i32)))
                .collect();
            lp.add_row(
                Sense::Le,
                house.comfort_high - free,
                coeffs.clone(),
                format!("comfort high house {} slot {}", house.id, t - 1),
            );
            lp.add_row(
                Sense::Ge,
                house.comfort_low - free,
                coeffs,
                format!("comfort low house {} slot {}", house.id, t - 1),
            );
        }
    }

    let energy_coeffs: Vec<(usize, f64)> = (0..n)
        .flat_map(|h| {
            let power = houses[h].ac_power;
            (0..horizon).map(move |t| (var(h, t), power * slot_h))
        })
        .collect();
    lp.add_row(Sense::Eq, energy_budget_kwh, energy_coeffs, "energy budget");

    let sol = solve_lp(&lp).map_err(|e| match e {
        LpError::Infeasible { violated } => DemandError::Infeasible {
            constraint: violated.first().cloned().unwrap_or_default(),
        },
        other => DemandError::InvalidInput(other.to_string()),
    })?;

    let u: Vec<Vec<f64>> = (0..n)
        .map(|h| (0..horizon).map(|t| sol.x[var(h, t)]).collect())
        .collect();
    let p_ref_total: Vec<f64> = (0..horizon)
        .map(|t| (0..n).map(|h| houses[h].ac_power * u[h][t]).sum())
        .collect();
    let cost = (0..n)
        .map(|h| {
            (0..horizon)
                .map(|t| houses[h].ac_power * slot_h * price[t] * u[h][t])
                .sum::<f64>()
        })
        .sum();
    Ok(FleetPlan {
        u,
        p_ref_total,
        energy_budget: energy_budget_kwh,
        cost,
    })
}

/// Exact feasibility bounds: full cooling gives the lowest reachable
/// trajectory, no cooling the highest. If even those leave the comfort band,
/// no control can help; name the first offending house and slot.
fn comfort_precheck(
    houses: &[ThermalHouse],
    ambient: &[f64],
    slot_h: f64,
) -> Result<(), DemandError> {
    for house in houses {
        let decay = 1.0 - slot_h * house.alpha;
        let gain = slot_h * house.cooling_rate();
        let mut coolest = house.temp;
        let mut warmest = house.temp;
        for (t, &amb) in ambient.iter().enumerate() {
            coolest = decay * coolest + slot_h * house.alpha * amb - gain;
            warmest = decay * warmest + slot_h * house.alpha * amb;
            if coolest > house.comfort_high + 1e-9 {
                return Err(DemandError::ComfortInfeasible {
                    house: house.id,
                    slot: t,
                });
            }
            if warmest < house.comfort_low - 1e-9 {
                return Err(DemandError::ComfortInfeasible {
                    house: house.id,
                    slot: t,
                });
            }
        }
    }
    Ok(())
}
