//! LinDistFlow solver for radial distribution feeders.
//!
//! Linearized branch flow: line flows are the sums of downstream loads and
//! squared voltages drop by `2 (r P + x Q)` per line. Loss terms are
//! neglected, which keeps voltage a linear function of loads.

use super::{ModelError, Network, Topology};

/// Real/reactive load at one bus, per unit (consumption positive).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PqLoad {
    pub p: f64,
    pub q: f64,
}

impl PqLoad {
    pub fn new(p: f64, q: f64) -> Self {
        Self { p, q }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinDistFlowSolution {
    /// Squared voltage magnitude per bus; the slack is fixed at 1.0.
    pub voltage_sq: Vec<f64>,
    /// Real power entering line `l` from its upstream end.
    pub flow_p: Vec<f64>,
    /// Reactive power entering line `l` from its upstream end.
    pub flow_q: Vec<f64>,
}

/// Solves the feeder for the given loads. The slack voltage is fixed at
/// 1.0 pu and every downstream bus sees the cumulative voltage drop.
pub fn lindistflow_solve(
    net: &Network,
    loads: &[PqLoad],
) -> Result<LinDistFlowSolution, ModelError> {
    if net.topology != Topology::RadialDistribution {
        return Err(ModelError::WrongTopology {
            expected: Topology::RadialDistribution,
            actual: net.topology,
        });
    }
    let n = net.n_buses();
    assert_eq!(loads.len(), n, "one load per bus");
    let (parent, order) = net.rooted_tree()?;

    // accumulate downstream load sums leaf-to-root
    let mut down_p: Vec<f64> = loads.iter().map(|l| l.p).collect();
    let mut down_q: Vec<f64> = loads.iter().map(|l| l.q).collect();
    let mut flow_p = vec![0.0; net.lines.len()];
    let mut flow_q = vec![0.0; net.lines.len()];
    for &bus in order.iter().rev() {
        if let Some((p, l)) = parent[bus] {
            flow_p[l] = down_p[bus];
            flow_q[l] = down_q[bus];
            down_p[p] += down_p[bus];
            down_q[p] += down_q[bus];
        }
    }

    // voltage drops root-to-leaf
    let mut voltage_sq = vec![1.0; n];
    for &bus in &order {
        if let Some((p, l)) = parent[bus] {
            let line = &net.lines[l];
            voltage_sq[bus] = voltage_sq[p] - 2.0 * (line.r * flow_p[l] + line.x * flow_q[l]);
        }
    }

    Ok(LinDistFlowSolution {
        voltage_sq,
        flow_p,
        flow_q,
    })
}
