//! Scenario-based risk-aware dispatch.
//!
//! One dispatch must work across a set of demand scenarios. Per-scenario
//! balance closes through a reserve slack at the slack bus: shortfall is
//! penalized at the cost of shortfall (`voll`), surplus is spilled for free
//! (curtailment). A fraction `epsilon` of scenarios may be discarded; the
//! solver removes them greedily, one at a time, keeping each removal only if
//! it lowers the expected cost, so cost is non-increasing in `epsilon`.

use super::ed::{ptdf_matrix, SCARCITY_LMP};
use super::{validate_units, DemandSpec, DispatchError, Generator};
use crate::lp::{solve_lp, LpError, LpProblem, Sense};
use crate::model::{Network, Topology};

use super::DispatchResult;

/// Default cost of shortfall, $/MWh. Chosen far above any marginal energy
/// price so covering retained demand always dominates paying the penalty.
pub const DEFAULT_VOLL: f64 = 10_000.0;

struct ScenarioModel<'a> {
    gens: &'a [Generator],
    net: &'a Network,
    scenarios: &'a [DemandSpec],
    s_base_mva: f64,
    voll: f64,
    vars: Vec<(usize, usize)>,
    ptdf: Option<Vec<Vec<f64>>>,
    limited_lines: Vec<usize>,
}

impl<'a> ScenarioModel<'a> {
    fn lp_for(&self, retained: &[usize], bump: Option<(usize, f64)>) -> LpProblem {
        let n_seg = self.vars.len();
        let k = retained.len();
        // layout: segments, then (shortfall, spill) per retained scenario
        let mut lp = LpProblem::new(n_seg + 2 * k);
        for (v, &(gi, si)) in self.vars.iter().enumerate() {
            let seg = self.gens[gi].segments[si];
            lp.set_bounds(v, 0.0, seg.mw);
            lp.set_cost(v, seg.price);
        }
        for i in 0..k {
            lp.set_cost(n_seg + 2 * i, self.voll / k as f64); // shortfall
            lp.set_cost(n_seg + 2 * i + 1, 0.0); // spill
        }
        for (gi, g) in self.gens.iter().enumerate() {
            if g.committed && g.p_min > 0.0 {
                let coeffs: Vec<(usize, f64)> = self
                    .vars
                    .iter()
                    .enumerate()
                    .filter(|(_, &(vg, _))| vg == gi)
                    .map(|(v, _)| (v, 1.0))
                    .collect();
                lp.add_row(Sense::Ge, g.p_min, coeffs, format!("p_min unit {}", g.id));
            }
        }
        for (i, &sc) in retained.iter().enumerate() {
            let demand = &self.scenarios[sc];
            let mut total = demand.total();
            if let Some((bus, delta)) = bump {
                let _ = bus;
                total += delta;
            }
            let mut coeffs: Vec<(usize, f64)> = (0..n_seg).map(|v| (v, 1.0)).collect();
            coeffs.push((n_seg + 2 * i, 1.0));
            coeffs.push((n_seg + 2 * i + 1, -1.0));
            lp.add_row(Sense::Eq, total, coeffs, format!("scenario {sc} balance"));

            if let Some(ptdf) = &self.ptdf {
                for &l in &self.limited_lines {
                    let limit = self.net.lines[l].flow_limit;
                    let mut demand_term: f64 = demand
                        .bus_mw
                        .iter()
                        .enumerate()
                        .map(|(b, &mw)| ptdf[l][b] * mw / self.s_base_mva)
                        .sum();
                    if let Some((bus, delta)) = bump {
                        demand_term += ptdf[l][bus] * delta / self.s_base_mva;
                    }
                    let row: Vec<(usize, f64)> = self
                        .vars
                        .iter()
                        .enumerate()
                        .map(|(v, &(gi, _))| (v, ptdf[l][self.gens[gi].bus] / self.s_base_mva))
                        .filter(|&(_, a)| a != 0.0)
                        .collect();
                    lp.add_row(
                        Sense::Le,
                        limit + demand_term,
                        row.clone(),
                        format!("scenario {sc} line {l} limit (forward)"),
                    );
                    lp.add_row(
                        Sense::Ge,
                        -limit + demand_term,
                        row,
                        format!("scenario {sc} line {l} limit (reverse)"),
                    );
                }
            }
        }
        lp
    }

    fn solve(&self, retained: &[usize]) -> Result<(Vec<f64>, f64), DispatchError> {
        match solve_lp(&self.lp_for(retained, None)) {
            Ok(sol) => Ok((sol.x, sol.objective)),
            Err(LpError::Infeasible { violated }) => Err(DispatchError::Infeasible {
                constraint: violated.first().cloned().unwrap_or_default(),
            }),
            Err(other) => Err(DispatchError::InvalidInput(other.to_string())),
        }
    }

    fn solve_cost_bumped(&self, retained: &[usize], bus: usize, delta: f64) -> Option<f64> {
        solve_lp(&self.lp_for(retained, Some((bus, delta))))
            .ok()
            .map(|s| s.objective)
    }
}

/// Single dispatch covering at least `ceil((1 - epsilon) * N)` scenarios,
/// minimizing expected cost (energy plus shortfall penalty) over the
/// retained set.
pub fn scenario_dispatch(
    gens: &[Generator],
    demand_scenarios: &[DemandSpec],
    net: &Network,
    s_base_mva: f64,
    epsilon: f64,
    voll: f64,
) -> Result<DispatchResult, DispatchError> {
    validate_units(gens)?;
    if net.topology != Topology::MeshedTransmission {
        return Err(DispatchError::InvalidInput(
            "dispatch requires a meshed transmission network".to_string(),
        ));
    }
    let n = demand_scenarios.len();
    if n == 0 {
        return Err(DispatchError::InvalidInput(
            "at least one scenario required".to_string(),
        ));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(DispatchError::InvalidInput(
            "epsilon must be in [0, 1)".to_string(),
        ));
    }
    for d in demand_scenarios {
        if d.bus_mw.len() != net.n_buses() {
            return Err(DispatchError::InvalidInput(
                "scenario demand length must match bus count".to_string(),
            ));
        }
    }
    let required = ((1.0 - epsilon) * n as f64).ceil().max(1.0) as usize;

    let mut vars = Vec::new();
    for (gi, g) in gens.iter().enumerate() {
        if !g.committed {
            continue;
        }
        for si in 0..g.segments.len() {
            vars.push((gi, si));
        }
    }
    let limited_lines: Vec<usize> = net
        .lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.flow_limit.is_finite())
        .map(|(i, _)| i)
        .collect();
    let ptdf = if limited_lines.is_empty() {
        None
    } else {
        Some(ptdf_matrix(net)?)
    };
    let model = ScenarioModel {
        gens,
        net,
        scenarios: demand_scenarios,
        s_base_mva,
        voll,
        vars,
        ptdf,
        limited_lines,
    };

    let mut retained: Vec<usize> = (0..n).collect();
    let mut current = model.solve(&retained);

    while retained.len() > required {
        let mut best: Option<(usize, f64)> = None;
        for (pos, _) in retained.iter().enumerate() {
            let mut trial = retained.clone();
            let dropped = trial.remove(pos);
            if let Ok((_, cost)) = model.solve(&trial) {
                let better = match best {
                    None => true,
                    Some((_, bc)) => cost < bc - 1e-12,
                };
                if better {
                    best = Some((dropped, cost));
                }
            }
        }
        match (&current, best) {
            (Ok((_, cur_cost)), Some((drop_idx, best_cost))) => {
                if best_cost < cur_cost - 1e-9 {
                    retained.retain(|&i| i != drop_idx);
                    current = model.solve(&retained);
                } else {
                    break; // dropping no longer helps
                }
            }
            (Err(_), Some((drop_idx, _))) => {
                retained.retain(|&i| i != drop_idx);
                current = model.solve(&retained);
            }
            (Err(_), None) => {
                // nothing single-drop feasible yet; shed the heaviest scenario
                let heaviest = *retained
                    .iter()
                    .max_by(|&&a, &&b| {
                        demand_scenarios[a]
                            .total()
                            .partial_cmp(&demand_scenarios[b].total())
                            .unwrap()
                    })
                    .unwrap();
                retained.retain(|&i| i != heaviest);
                current = model.solve(&retained);
            }
            (Ok(_), None) => break,
        }
    }

    let (x, objective) = current.map_err(|e| DispatchError::Infeasible {
        constraint: format!("no dispatch covers the required scenario fraction: {e}"),
    })?;

    let mut output_mw = vec![0.0; gens.len()];
    for (v, &(gi, _)) in model.vars.iter().enumerate() {
        output_mw[gi] += x[v];
    }

    let n_buses = net.n_buses();
    let mut binding_lines: Vec<usize> = Vec::new();
    if let Some(ptdf) = &model.ptdf {
        for &sc in &retained {
            let mut inj = vec![0.0; n_buses];
            for (gi, g) in gens.iter().enumerate() {
                inj[g.bus] += output_mw[gi] / s_base_mva;
            }
            for (b, &mw) in demand_scenarios[sc].bus_mw.iter().enumerate() {
                inj[b] -= mw / s_base_mva;
            }
            for &l in &model.limited_lines {
                let flow: f64 = (0..n_buses).map(|b| ptdf[l][b] * inj[b]).sum();
                if flow.abs() >= net.lines[l].flow_limit - 1e-6 && !binding_lines.contains(&l) {
                    binding_lines.push(l);
                }
            }
        }
        binding_lines.sort_unstable();
    }

    // expected marginal price of one more MW at each bus across the
    // retained scenarios
    let mut lmp = vec![0.0; n_buses];
    for b in 0..n_buses {
        lmp[b] = match model.solve_cost_bumped(&retained, b, 1e-3) {
            Some(cost) => (cost - objective) / 1e-3,
            None => SCARCITY_LMP,
        };
    }

    Ok(DispatchResult {
        output_mw,
        total_cost: objective,
        lmp,
        binding_lines,
    })
}
