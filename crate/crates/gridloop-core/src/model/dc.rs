//! DC power flow for meshed transmission networks.

use super::{ModelError, Network, Topology};
use crate::linalg::{solve, Mat};

/// Angles are radians with the slack pinned at zero; `flows[l]` is the
/// per-unit real power on line `l` in its `from -> to` direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DcFlowSolution {
    pub angles: Vec<f64>,
    pub flows: Vec<f64>,
}

impl DcFlowSolution {
    /// Net power leaving bus `b` over the lines (equals its injection when
    /// the input was balanced; at the slack it also absorbs any residual).
    pub fn net_outflow(&self, net: &Network, b: usize) -> f64 {
        let mut total = 0.0;
        for (l, line) in net.lines.iter().enumerate() {
            if line.from == b {
                total += self.flows[l];
            } else if line.to == b {
                total -= self.flows[l];
            }
        }
        total
    }
}

/// Solves `B theta = P` on the non-slack buses and recovers line flows
/// `flow = susceptance * (theta_from - theta_to)`.
///
/// Injections should sum to zero; any residual is absorbed by the slack bus.
pub fn dc_power_flow(net: &Network, injections: &[f64]) -> Result<DcFlowSolution, ModelError> {
    if net.topology != Topology::MeshedTransmission {
        return Err(ModelError::WrongTopology {
            expected: Topology::MeshedTransmission,
            actual: net.topology,
        });
    }
    let n = net.n_buses();
    assert_eq!(injections.len(), n, "one injection per bus");
    let slack = net.slack();

    // reduced susceptance Laplacian over non-slack buses
    let reduced: Vec<usize> = (0..n).filter(|&b| b != slack).collect();
    let index_of: Vec<Option<usize>> = {
        let mut map = vec![None; n];
        for (i, &b) in reduced.iter().enumerate() {
            map[b] = Some(i);
        }
        map
    };
    let m = reduced.len();
    let mut b_mat = Mat::zeros(m, m);
    for line in &net.lines {
        let (f, t, b) = (line.from, line.to, line.susceptance);
        if let Some(fi) = index_of[f] {
            *b_mat.at_mut(fi, fi) += b;
        }
        if let Some(ti) = index_of[t] {
            *b_mat.at_mut(ti, ti) += b;
        }
        if let (Some(fi), Some(ti)) = (index_of[f], index_of[t]) {
            *b_mat.at_mut(fi, ti) -= b;
            *b_mat.at_mut(ti, fi) -= b;
        }
    }
    let rhs: Vec<f64> = reduced.iter().map(|&b| injections[b]).collect();
    let theta_reduced = solve(&b_mat, &rhs).map_err(|_| ModelError::SingularSusceptance)?;

    let mut angles = vec![0.0; n];
    for (i, &b) in reduced.iter().enumerate() {
        angles[b] = theta_reduced[i];
    }
    let flows = net
        .lines
        .iter()
        .map(|line| line.susceptance * (angles[line.from] - angles[line.to]))
        .collect();
    Ok(DcFlowSolution { angles, flows })
}
