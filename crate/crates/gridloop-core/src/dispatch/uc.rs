//! Day-ahead unit commitment, solved to global optimality at desk scale.
//!
//! With no minimum up/down times the problem decomposes over hours: the only
//! inter-hour coupling is the startup cost, which depends on consecutive
//! commitment states. Dynamic programming over the 2^U per-hour states with
//! economic-dispatch subproblems therefore explores exactly the space an
//! exhaustive enumeration would, without the 2^(U*H) blowup.

use super::ed::EdModel;
use super::{DemandSpec, DispatchError, Generator};
use crate::model::Network;

/// Cost ties within this tolerance resolve to the lexicographically smallest
/// commitment vector (hour-major, unit-minor, off before on).
const TIE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct CommitmentSchedule {
    /// `on[hour][unit]`
    pub on: Vec<Vec<bool>>,
    /// `dispatch_mw[hour][unit]`
    pub dispatch_mw: Vec<Vec<f64>>,
    /// Energy plus startup cost over the horizon, $.
    pub total_cost: f64,
}

/// Encodes unit `u` of `n` at the bit that makes ascending integers scan
/// commitment vectors in lexicographic order (unit 0 most significant).
#[inline]
fn unit_bit(state: u32, unit: usize, n_units: usize) -> bool {
    (state >> (n_units - 1 - unit)) & 1 == 1
}

fn startup_cost(gens: &[Generator], prev: u32, next: u32, n_units: usize) -> f64 {
    let mut cost = 0.0;
    for (u, g) in gens.iter().enumerate() {
        if unit_bit(next, u, n_units) && !unit_bit(prev, u, n_units) {
            cost += g.startup_cost;
        }
    }
    cost
}

/// Globally optimal on/off schedule plus per-hour dispatch.
///
/// Units start the horizon off, so a unit pays its startup cost in the first
/// hour it runs and again after every gap. The `committed` flags on the
/// input units are ignored; commitment is what this function decides.
pub fn unit_commitment(
    gens: &[Generator],
    hourly_demand: &[DemandSpec],
    net: &Network,
    s_base_mva: f64,
) -> Result<CommitmentSchedule, DispatchError> {
    let n_units = gens.len();
    let hours = hourly_demand.len();
    if n_units == 0 || n_units > 10 {
        return Err(DispatchError::InvalidInput(
            "unit_commitment handles 1..=10 units".to_string(),
        ));
    }
    if hours == 0 || hours > 24 {
        return Err(DispatchError::InvalidInput(
            "unit_commitment handles 1..=24 hours".to_string(),
        ));
    }
    for d in hourly_demand {
        if d.bus_mw.len() != net.n_buses() {
            return Err(DispatchError::InvalidInput(
                "demand vector length must match bus count".to_string(),
            ));
        }
    }

    let n_states = 1u32 << n_units;

    // one dispatch model per commitment state
    let state_gens: Vec<Vec<Generator>> = (0..n_states)
        .map(|s| {
            gens.iter()
                .enumerate()
                .map(|(u, g)| {
                    let mut g = g.clone();
                    g.committed = unit_bit(s, u, n_units);
                    g
                })
                .collect()
        })
        .collect();
    let models: Vec<EdModel> = state_gens
        .iter()
        .map(|gs| EdModel::build(gs, net, s_base_mva))
        .collect::<Result<_, _>>()?;

    // per-hour per-state dispatch cost; None marks infeasible
    let mut hour_cost: Vec<Vec<Option<f64>>> = Vec::with_capacity(hours);
    for (h, demand) in hourly_demand.iter().enumerate() {
        let mut row = Vec::with_capacity(n_states as usize);
        for s in 0..n_states {
            row.push(models[s as usize].solve_cost(demand).ok());
        }
        if row.iter().all(|c| c.is_none()) {
            return Err(DispatchError::NoFeasibleCommitment { hour: h });
        }
        hour_cost.push(row);
    }

    // cost-to-go: value[h][prev] = best cost of hours h.. given state before h
    let mut value = vec![vec![f64::INFINITY; n_states as usize]; hours + 1];
    value[hours] = vec![0.0; n_states as usize];
    for h in (0..hours).rev() {
        for prev in 0..n_states {
            let mut best = f64::INFINITY;
            for s in 0..n_states {
                let Some(ed) = hour_cost[h][s as usize] else {
                    continue;
                };
                let v = startup_cost(gens, prev, s, n_units) + ed + value[h + 1][s as usize];
                if v < best {
                    best = v;
                }
            }
            value[h][prev as usize] = best;
        }
    }
    if !value[0][0].is_finite() {
        // per-hour feasibility was checked, so this cannot trigger, but a
        // structured error beats a panic if it ever does
        return Err(DispatchError::Infeasible {
            constraint: "no feasible commitment path".to_string(),
        });
    }

    // forward reconstruction; ascending state scan realizes the lexicographic
    // tie-break because unit 0 occupies the most significant bit
    let mut on = Vec::with_capacity(hours);
    let mut dispatch_mw = Vec::with_capacity(hours);
    let mut total_cost = 0.0;
    let mut prev = 0u32;
    for h in 0..hours {
        let target = value[h][prev as usize];
        let mut chosen = None;
        for s in 0..n_states {
            let Some(ed) = hour_cost[h][s as usize] else {
                continue;
            };
            let v = startup_cost(gens, prev, s, n_units) + ed + value[h + 1][s as usize];
            if v <= target + TIE_TOL {
                chosen = Some(s);
                break;
            }
        }
        let s = chosen.expect("value table admits at least one choice");
        total_cost += startup_cost(gens, prev, s, n_units);

        let result = models[s as usize]
            .solve_full(&hourly_demand[h])
            .expect("state was feasible when costed");
        total_cost += result.total_cost;
        on.push((0..n_units).map(|u| unit_bit(s, u, n_units)).collect());
        dispatch_mw.push(result.output_mw);
        prev = s;
    }

    Ok(CommitmentSchedule {
        on,
        dispatch_mw,
        total_cost,
    })
}
