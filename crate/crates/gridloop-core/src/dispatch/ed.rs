//! Economic dispatch: cost-minimal generator outputs against per-bus demand
//! with DC power flow line limits.

use super::{validate_units, DemandSpec, DispatchError, Generator};
use crate::lp::{solve_lp, LpError, LpProblem, Sense};
use crate::model::{dc_power_flow, Network, Topology};

/// Scarcity price used when a one-more-MW probe is infeasible, $/MWh.
pub(crate) const SCARCITY_LMP: f64 = 10_000.0;

/// Demand bump used for the marginal-price probe, MW.
const LMP_DELTA_MW: f64 = 1e-3;

/// Tolerance for calling a line flow "binding" against its limit, pu.
const BINDING_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct DispatchResult {
    /// Per-generator output, MW, in input order.
    pub output_mw: Vec<f64>,
    /// Total energy cost, $.
    pub total_cost: f64,
    /// Locational marginal price per bus, $/MWh: the cost of serving one
    /// more MW there, measured by a re-solve with the demand bumped.
    pub lmp: Vec<f64>,
    /// Indices of lines whose flow sits at the limit.
    pub binding_lines: Vec<usize>,
}

/// Power transfer distribution factors: `ptdf[l][b]` is the per-unit flow on
/// line `l` caused by one per-unit injection at bus `b` withdrawn at the
/// slack. Columns come straight from DC power flow solves.
pub(crate) fn ptdf_matrix(net: &Network) -> Result<Vec<Vec<f64>>, DispatchError> {
    let n = net.n_buses();
    let mut cols = Vec::with_capacity(n);
    for b in 0..n {
        let mut inj = vec![0.0; n];
        inj[b] = 1.0;
        cols.push(dc_power_flow(net, &inj)?.flows);
    }
    // transpose to line-major
    let n_lines = net.lines.len();
    let mut ptdf = vec![vec![0.0; n]; n_lines];
    for b in 0..n {
        for l in 0..n_lines {
            ptdf[l][b] = cols[b][l];
        }
    }
    Ok(ptdf)
}

pub(crate) struct EdModel<'a> {
    gens: &'a [Generator],
    net: &'a Network,
    s_base_mva: f64,
    /// (gen index, segment index) per LP variable
    vars: Vec<(usize, usize)>,
    ptdf: Option<Vec<Vec<f64>>>,
    limited_lines: Vec<usize>,
}

impl<'a> EdModel<'a> {
    pub(crate) fn build(
        gens: &'a [Generator],
        net: &'a Network,
        s_base_mva: f64,
    ) -> Result<Self, DispatchError> {
        validate_units(gens)?;
        if net.topology != Topology::MeshedTransmission {
            return Err(DispatchError::InvalidInput(
                "dispatch requires a meshed transmission network".to_string(),
            ));
        }
        if s_base_mva <= 0.0 {
            return Err(DispatchError::InvalidInput(
                "s_base_mva must be > 0".to_string(),
            ));
        }
        for g in gens {
            if g.bus >= net.n_buses() {
                return Err(DispatchError::InvalidInput(format!(
                    "unit {} references bus {} outside the network",
                    g.id, g.bus
                )));
            }
        }
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
        Ok(Self {
            gens,
            net,
            s_base_mva,
            vars,
            ptdf,
            limited_lines,
        })
    }

    fn lp_for(&self, demand: &DemandSpec) -> LpProblem {
        let mut lp = LpProblem::new(self.vars.len());
        for (v, &(gi, si)) in self.vars.iter().enumerate() {
            let seg = self.gens[gi].segments[si];
            lp.set_bounds(v, 0.0, seg.mw);
            lp.set_cost(v, seg.price);
        }
        lp.add_row(
            Sense::Eq,
            demand.total(),
            (0..self.vars.len()).map(|v| (v, 1.0)).collect(),
            "power balance",
        );
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
        if let Some(ptdf) = &self.ptdf {
            for &l in &self.limited_lines {
                let limit = self.net.lines[l].flow_limit;
                // flow_l = sum_b ptdf[l][b] * (gen_b - dem_b) / s_base
                let demand_term: f64 = demand
                    .bus_mw
                    .iter()
                    .enumerate()
                    .map(|(b, &mw)| ptdf[l][b] * mw / self.s_base_mva)
                    .sum();
                let coeffs: Vec<(usize, f64)> = self
                    .vars
                    .iter()
                    .enumerate()
                    .map(|(v, &(gi, _))| (v, ptdf[l][self.gens[gi].bus] / self.s_base_mva))
                    .filter(|&(_, a)| a != 0.0)
                    .collect();
                lp.add_row(
                    Sense::Le,
                    limit + demand_term,
                    coeffs.clone(),
                    format!("line {l} limit (forward)"),
                );
                lp.add_row(
                    Sense::Ge,
                    -limit + demand_term,
                    coeffs,
                    format!("line {l} limit (reverse)"),
                );
            }
        }
        lp
    }

    fn check_capacity(&self, demand: &DemandSpec) -> Result<(), DispatchError> {
        let total = demand.total();
        let cap: f64 = self
            .gens
            .iter()
            .filter(|g| g.committed)
            .map(|g| g.p_max)
            .sum();
        if cap < total - 1e-9 {
            return Err(DispatchError::Infeasible {
                constraint: format!("committed capacity {cap} MW < demand {total} MW"),
            });
        }
        let min_sum: f64 = self
            .gens
            .iter()
            .filter(|g| g.committed)
            .map(|g| g.p_min)
            .sum();
        if min_sum > total + 1e-9 {
            return Err(DispatchError::Infeasible {
                constraint: format!("sum of p_min {min_sum} MW > demand {total} MW"),
            });
        }
        Ok(())
    }

    /// Total cost of serving `demand`, or the infeasibility.
    pub(crate) fn solve_cost(&self, demand: &DemandSpec) -> Result<f64, DispatchError> {
        self.check_capacity(demand)?;
        match solve_lp(&self.lp_for(demand)) {
            Ok(sol) => Ok(sol.objective),
            Err(e) => Err(lift_lp_error(e)),
        }
    }

    pub(crate) fn solve_full(&self, demand: &DemandSpec) -> Result<DispatchResult, DispatchError> {
        self.check_capacity(demand)?;
        let sol = solve_lp(&self.lp_for(demand)).map_err(lift_lp_error)?;

        let mut output_mw = vec![0.0; self.gens.len()];
        for (v, &(gi, _)) in self.vars.iter().enumerate() {
            output_mw[gi] += sol.x[v];
        }

        // binding lines from the realized flows
        let n = self.net.n_buses();
        let mut binding_lines = Vec::new();
        if let Some(ptdf) = &self.ptdf {
            let mut inj = vec![0.0; n];
            for (gi, g) in self.gens.iter().enumerate() {
                inj[g.bus] += output_mw[gi] / self.s_base_mva;
            }
            for (b, &mw) in demand.bus_mw.iter().enumerate() {
                inj[b] -= mw / self.s_base_mva;
            }
            for &l in &self.limited_lines {
                let flow: f64 = (0..n).map(|b| ptdf[l][b] * inj[b]).sum();
                if flow.abs() >= self.net.lines[l].flow_limit - BINDING_TOL {
                    binding_lines.push(l);
                }
            }
        }

        // marginal price probe per bus
        let mut lmp = vec![0.0; n];
        for b in 0..n {
            let mut bumped = demand.clone();
            bumped.bus_mw[b] += LMP_DELTA_MW;
            lmp[b] = match self.solve_cost(&bumped) {
                Ok(cost) => (cost - sol.objective) / LMP_DELTA_MW,
                Err(_) => SCARCITY_LMP,
            };
        }

        Ok(DispatchResult {
            output_mw,
            total_cost: sol.objective,
            lmp,
            binding_lines,
        })
    }
}

fn lift_lp_error(e: LpError) -> DispatchError {
    match e {
        LpError::Infeasible { violated } => DispatchError::Infeasible {
            constraint: violated
                .first()
                .cloned()
                .unwrap_or_else(|| "unknown".to_string()),
        },
        other => DispatchError::InvalidInput(other.to_string()),
    }
}

/// Cost-minimal dispatch of the committed units against `demand`.
///
/// Uncommitted units stay at zero. Line limits are enforced through the
/// PTDF image of the nodal injections; `s_base_mva` converts MW to per unit.
pub fn economic_dispatch(
    gens: &[Generator],
    demand: &DemandSpec,
    net: &Network,
    s_base_mva: f64,
) -> Result<DispatchResult, DispatchError> {
    if demand.bus_mw.len() != net.n_buses() {
        return Err(DispatchError::InvalidInput(
            "demand vector length must match bus count".to_string(),
        ));
    }
    EdModel::build(gens, net, s_base_mva)?.solve_full(demand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bus, BusKind, Line};

    fn unconstrained_net(n: usize) -> Network {
        let buses = (0..n)
            .map(|i| Bus::new(i, if i == 0 { BusKind::Slack } else { BusKind::Pq }))
            .collect();
        let lines = (1..n).map(|i| Line::transmission(0, i, 10.0)).collect();
        Network::new(buses, lines, Topology::MeshedTransmission).unwrap()
    }

    #[test]
    fn merit_order_two_units() {
        let net = unconstrained_net(2);
        let gens = vec![
            Generator::single_cost(0, 0, 10.0, 0.0, 50.0),
            Generator::single_cost(1, 1, 20.0, 0.0, 50.0),
        ];
        let demand = DemandSpec::at_bus(2, 1, 60.0);
        let r = economic_dispatch(&gens, &demand, &net, 100.0).unwrap();
        assert!((r.output_mw[0] - 50.0).abs() < 1e-9);
        assert!((r.output_mw[1] - 10.0).abs() < 1e-9);
        assert!((r.total_cost - 700.0).abs() < 1e-9);
        assert!(r.binding_lines.is_empty());
    }

    #[test]
    fn zero_demand_zero_cost() {
        let net = unconstrained_net(2);
        let gens = vec![
            Generator::single_cost(0, 0, 10.0, 0.0, 50.0),
            Generator::single_cost(1, 1, 20.0, 0.0, 50.0),
        ];
        let r = economic_dispatch(&gens, &DemandSpec::new(vec![0.0, 0.0]), &net, 100.0).unwrap();
        assert_eq!(r.output_mw, vec![0.0, 0.0]);
        assert_eq!(r.total_cost, 0.0);
    }

    #[test]
    fn lmps_equal_without_congestion() {
        let net = unconstrained_net(3);
        let gens = vec![
            Generator::single_cost(0, 0, 10.0, 0.0, 50.0),
            Generator::single_cost(1, 1, 20.0, 0.0, 50.0),
        ];
        let demand = DemandSpec::new(vec![0.0, 30.0, 30.0]);
        let r = economic_dispatch(&gens, &demand, &net, 100.0).unwrap();
        for b in 1..3 {
            assert!(
                (r.lmp[b] - r.lmp[0]).abs() < 1e-9,
                "lmp {} vs {}",
                r.lmp[b],
                r.lmp[0]
            );
        }
        // marginal unit is the 20 $/MWh one
        assert!((r.lmp[0] - 20.0).abs() < 1e-6);
    }

    #[test]
    fn congestion_splits_lmp_and_forces_out_of_merit() {
        // cheap unit at bus 0, expensive at bus 1, all load at bus 1,
        // single line 0-1 with a tight limit
        let net = Network::new(
            vec![Bus::new(0, BusKind::Slack), Bus::new(1, BusKind::Pq)],
            vec![Line::transmission(0, 1, 10.0).with_flow_limit(0.2)],
            Topology::MeshedTransmission,
        )
        .unwrap();
        let gens = vec![
            Generator::single_cost(0, 0, 10.0, 0.0, 100.0),
            Generator::single_cost(1, 1, 30.0, 0.0, 100.0),
        ];
        let demand = DemandSpec::at_bus(2, 1, 60.0);
        // line carries at most 0.2 pu * 100 MVA = 20 MW
        let r = economic_dispatch(&gens, &demand, &net, 100.0).unwrap();
        assert!((r.output_mw[0] - 20.0).abs() < 1e-6);
        assert!((r.output_mw[1] - 40.0).abs() < 1e-6);
        assert_eq!(r.binding_lines, vec![0]);
        assert!((r.lmp[0] - 10.0).abs() < 1e-6);
        assert!((r.lmp[1] - 30.0).abs() < 1e-6);
    }

    #[test]
    fn p_min_is_respected() {
        let net = unconstrained_net(2);
        let gens = vec![
            Generator::single_cost(0, 0, 10.0, 0.0, 50.0),
            Generator::single_cost(1, 1, 20.0, 15.0, 50.0),
        ];
        let demand = DemandSpec::at_bus(2, 0, 40.0);
        let r = economic_dispatch(&gens, &demand, &net, 100.0).unwrap();
        assert!(
            (r.output_mw[1] - 15.0).abs() < 1e-9,
            "pricier unit pinned at p_min"
        );
        assert!((r.output_mw[0] - 25.0).abs() < 1e-9);
    }

    #[test]
    fn capacity_shortfall_is_named() {
        let net = unconstrained_net(2);
        let gens = vec![Generator::single_cost(0, 0, 10.0, 0.0, 50.0)];
        let err =
            economic_dispatch(&gens, &DemandSpec::at_bus(2, 1, 80.0), &net, 100.0).unwrap_err();
        match err {
            DispatchError::Infeasible { constraint } => {
                assert!(constraint.contains("capacity"), "{constraint}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn uncommitted_units_stay_off() {
        let net = unconstrained_net(2);
        let mut expensive = Generator::single_cost(1, 1, 5.0, 0.0, 50.0);
        expensive.committed = false;
        let gens = vec![Generator::single_cost(0, 0, 10.0, 0.0, 50.0), expensive];
        let r = economic_dispatch(&gens, &DemandSpec::at_bus(2, 0, 30.0), &net, 100.0).unwrap();
        assert_eq!(r.output_mw[1], 0.0);
        assert!((r.output_mw[0] - 30.0).abs() < 1e-9);
    }
}
