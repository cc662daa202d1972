//! Charging-station placement on a radial feeder.
//!
//! Branch and bound over the open/closed station vector with an exact inner
//! spot assignment. Cost counts station fixed costs plus a uniform per-spot
//! cost, so the inner problem reduces to: does some distribution of the
//! minimum spot count satisfy the LinDistFlow voltage band and the line
//! current proxies? Extra spots only deepen voltage drops, so the minimum
//! count is always the cheapest candidate.

use super::EvError;
use crate::model::{lindistflow_solve, within_current_proxy, Network, PqLoad, Topology};

/// Constraint family that blocked an infeasible placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintClass {
    DemandFloor,
    Voltage,
    CurrentLimit,
    Budget,
}

#[derive(Debug, Clone)]
pub struct PlacementProblem {
    pub net: Network,
    /// Candidate bus indices for stations.
    pub candidates: Vec<usize>,
    /// Station fixed cost per candidate, $.
    pub fixed_cost: Vec<f64>,
    /// Cost per charging spot, $.
    pub per_spot_cost: f64,
    /// Power drawn by one occupied spot, kW.
    pub spot_power_kw: f64,
    /// Minimum total charging power to provide, kW.
    pub demand_floor_kw: f64,
    /// Budget cap on the same cost the objective minimizes, $.
    pub budget: f64,
    /// Voltage magnitude band, pu.
    pub v_min: f64,
    pub v_max: f64,
    /// Maximum spots per station.
    pub y_max: u32,
    /// Existing feeder loads, pu.
    pub base_load: Vec<PqLoad>,
    /// kVA base converting spot kW to per unit.
    pub kva_base: f64,
}

#[derive(Debug, Clone)]
pub struct Placement {
    /// Station open flags, one per candidate.
    pub built: Vec<bool>,
    /// Spot counts, one per candidate.
    pub spots: Vec<u32>,
    /// Total cost (fixed + per-spot), $.
    pub cost: f64,
    /// Squared bus voltages at the chosen placement.
    pub voltage_sq: Vec<f64>,
}

struct Search<'a> {
    prob: &'a PlacementProblem,
    spots_needed: u32,
    check_voltage: bool,
    check_current: bool,
    check_budget: bool,
}

impl<'a> Search<'a> {
    /// Feeder state with `spots[i]` spots at each open candidate.
    fn solve_feeder(&self, spots: &[u32]) -> Result<Vec<f64>, EvError> {
        let mut loads = self.prob.base_load.clone();
        for (i, &y) in spots.iter().enumerate() {
            if y > 0 {
                let bus = self.prob.candidates[i];
                loads[bus].p += y as f64 * self.prob.spot_power_kw / self.prob.kva_base;
            }
        }
        let sol = lindistflow_solve(&self.prob.net, &loads)?;
        if self.check_voltage {
            for &vsq in &sol.voltage_sq {
                if vsq < self.prob.v_min * self.prob.v_min - 1e-12
                    || vsq > self.prob.v_max * self.prob.v_max + 1e-12
                {
                    return Err(EvError::PlacementInfeasible {
                        class: ConstraintClass::Voltage,
                    });
                }
            }
        }
        if self.check_current {
            for (l, line) in self.prob.net.lines.iter().enumerate() {
                if line.current_limit.is_finite()
                    && !within_current_proxy(sol.flow_p[l], sol.flow_q[l], line.current_limit)
                {
                    return Err(EvError::PlacementInfeasible {
                        class: ConstraintClass::CurrentLimit,
                    });
                }
            }
        }
        Ok(sol.voltage_sq)
    }

    fn network_ok(&self, spots: &[u32]) -> bool {
        self.solve_feeder(spots).is_ok()
    }

    /// Lexicographically smallest distribution of exactly `remaining` spots
    /// over the open candidates from `idx` on, all network checks passing.
    /// Network stress grows with every added spot, so a partial assignment
    /// that already violates the checks prunes the whole subtree.
    fn assign_spots(
        &self,
        open: &[bool],
        spots: &mut Vec<u32>,
        idx: usize,
        remaining: u32,
    ) -> bool {
        if remaining == 0 {
            return self.network_ok(spots);
        }
        if idx >= open.len() {
            return false;
        }
        let capacity_rest: u32 = (idx..open.len())
            .filter(|&i| open[i])
            .map(|_| self.prob.y_max)
            .sum();
        if capacity_rest < remaining {
            return false;
        }
        let max_here = if open[idx] {
            self.prob.y_max.min(remaining)
        } else {
            0
        };
        for y in 0..=max_here {
            spots[idx] = y;
            if y > 0 && !self.network_ok(spots) {
                spots[idx] = 0;
                return false; // more spots here only make it worse
            }
            if self.assign_spots(open, spots, idx + 1, remaining - y) {
                return true;
            }
        }
        spots[idx] = 0;
        false
    }

    /// Best placement over all open/closed vectors, depth-first in
    /// lexicographic order (closed branch first) with cost-bound pruning.
    fn branch(
        &self,
        open: &mut Vec<bool>,
        idx: usize,
        fixed_so_far: f64,
        incumbent: &mut Option<Placement>,
    ) -> Result<(), EvError> {
        let spot_cost = self.spots_needed as f64 * self.prob.per_spot_cost;
        let bound = fixed_so_far + spot_cost;
        if let Some(inc) = incumbent {
            if bound >= inc.cost - 1e-9 {
                return Ok(()); // cannot strictly improve
            }
        }
        if self.check_budget && bound > self.prob.budget + 1e-9 {
            return Ok(());
        }
        if idx == open.len() {
            let open_capacity: u64 = open
                .iter()
                .filter(|&&o| o)
                .map(|_| self.prob.y_max as u64)
                .sum();
            if open_capacity < self.spots_needed as u64 {
                return Ok(());
            }
            let mut spots = vec![0u32; open.len()];
            if !self.assign_spots(open, &mut spots, 0, self.spots_needed) {
                return Ok(());
            }
            let cost = fixed_so_far + spot_cost;
            let voltage_sq = self.solve_feeder(&spots)?;
            let better = match incumbent {
                None => true,
                Some(inc) => cost < inc.cost - 1e-9,
            };
            if better {
                *incumbent = Some(Placement {
                    built: open.clone(),
                    spots,
                    cost,
                    voltage_sq,
                });
            }
            return Ok(());
        }
        open[idx] = false;
        self.branch(open, idx + 1, fixed_so_far, incumbent)?;
        open[idx] = true;
        self.branch(
            open,
            idx + 1,
            fixed_so_far + self.prob.fixed_cost[idx],
            incumbent,
        )?;
        open[idx] = false;
        Ok(())
    }

    fn run(&self) -> Result<Option<Placement>, EvError> {
        let mut open = vec![false; self.prob.candidates.len()];
        let mut incumbent = None;
        self.branch(&mut open, 0, 0.0, &mut incumbent)?;
        Ok(incumbent)
    }
}

/// Sites stations and assigns spot counts minimizing fixed plus per-spot
/// cost, subject to the demand floor, the voltage band, line current
/// proxies, and the budget. Ties resolve to the lexicographically smallest
/// `(x, y)` vector. Infeasibility names the binding constraint class.
pub fn evcs_place(prob: &PlacementProblem) -> Result<Placement, EvError> {
    validate(prob)?;
    let spots_needed = (prob.demand_floor_kw / prob.spot_power_kw).ceil().max(0.0) as u32;

    if spots_needed == 0 {
        // nothing to build
        let search = Search {
            prob,
            spots_needed: 0,
            check_voltage: true,
            check_current: true,
            check_budget: true,
        };
        let voltage_sq = search.solve_feeder(&vec![0u32; prob.candidates.len()])?;
        return Ok(Placement {
            built: vec![false; prob.candidates.len()],
            spots: vec![0; prob.candidates.len()],
            cost: 0.0,
            voltage_sq,
        });
    }

    let full = Search {
        prob,
        spots_needed,
        check_voltage: true,
        check_current: true,
        check_budget: true,
    };
    if let Some(p) = full.run()? {
        return Ok(p);
    }

    // infeasible: find the binding constraint class by relaxing in stages
    if (prob.candidates.len() as f64) * (prob.y_max as f64) * prob.spot_power_kw
        < prob.demand_floor_kw - 1e-9
    {
        return Err(EvError::PlacementInfeasible {
            class: ConstraintClass::DemandFloor,
        });
    }
    let no_budget = Search {
        prob,
        spots_needed,
        check_voltage: true,
        check_current: true,
        check_budget: false,
    };
    if no_budget.run()?.is_some() {
        return Err(EvError::PlacementInfeasible {
            class: ConstraintClass::Budget,
        });
    }
    let no_voltage = Search {
        prob,
        spots_needed,
        check_voltage: false,
        check_current: true,
        check_budget: false,
    };
    if no_voltage.run()?.is_some() {
        return Err(EvError::PlacementInfeasible {
            class: ConstraintClass::Voltage,
        });
    }
    let unconstrained = Search {
        prob,
        spots_needed,
        check_voltage: false,
        check_current: false,
        check_budget: false,
    };
    if unconstrained.run()?.is_some() {
        return Err(EvError::PlacementInfeasible {
            class: ConstraintClass::CurrentLimit,
        });
    }
    Err(EvError::PlacementInfeasible {
        class: ConstraintClass::DemandFloor,
    })
}

fn validate(prob: &PlacementProblem) -> Result<(), EvError> {
    let fail = |m: &str| Err(EvError::InvalidInput(m.to_string()));
    if prob.net.topology != Topology::RadialDistribution {
        return fail("placement requires a radial distribution network");
    }
    if prob.candidates.len() > 12 {
        return fail("placement handles at most 12 candidate nodes");
    }
    if prob.candidates.len() != prob.fixed_cost.len() {
        return fail("fixed_cost must match candidates");
    }
    if prob.candidates.iter().any(|&c| c >= prob.net.n_buses()) {
        return fail("candidate bus index out of range");
    }
    if prob.base_load.len() != prob.net.n_buses() {
        return fail("base_load must cover every bus");
    }
    if prob.spot_power_kw <= 0.0 || prob.kva_base <= 0.0 {
        return fail("spot_power_kw and kva_base must be > 0");
    }
    if prob.demand_floor_kw < 0.0 || prob.budget < 0.0 {
        return fail("demand floor and budget must be >= 0");
    }
    if !(prob.v_min >= 0.0 && prob.v_min < prob.v_max) {
        return fail("need 0 <= v_min < v_max");
    }
    Ok(())
}
