//! Static network model and the two linearized power-flow solvers.
//!
//! Transmission networks use DC power flow (angles and real-power line
//! flows), radial distribution feeders use LinDistFlow (squared voltage
//! magnitudes with the loss quadratic dropped). Both are linear so every
//! optimization built on top stays a linear program.
//!
//! Per-unit system throughout; base values are declared by the scenario
//! configuration.

mod dc;
mod lindistflow;

pub use dc::{dc_power_flow, DcFlowSolution};
pub use lindistflow::{lindistflow_solve, LinDistFlowSolution, PqLoad};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("network validation failed: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("susceptance matrix is singular (network is disconnected)")]
    SingularSusceptance,
    #[error("network is not radial: {0}")]
    NotRadial(String),
    #[error("operation requires {expected:?} topology, network is {actual:?}")]
    WrongTopology {
        expected: Topology,
        actual: Topology,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Slack,
    Pq,
    Pv,
}

/// One network node. `id` doubles as the index into per-bus vectors, so ids
/// must be contiguous from zero.
#[derive(Debug, Clone)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    /// Squared voltage magnitude, per unit.
    pub voltage_sq: f64,
    /// Voltage angle, radians.
    pub angle: f64,
    /// Real power injection, per unit (generation positive).
    pub p_inject: f64,
    /// Reactive power injection, per unit.
    pub q_inject: f64,
}

impl Bus {
    pub fn new(id: usize, kind: BusKind) -> Self {
        Self {
            id,
            kind,
            voltage_sq: 1.0,
            angle: 0.0,
            p_inject: 0.0,
            q_inject: 0.0,
        }
    }
}

/// One branch. Transmission lines carry `susceptance`; distribution lines
/// carry the `r`/`x` impedances used by LinDistFlow.
#[derive(Debug, Clone)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Series susceptance, per unit (transmission).
    pub susceptance: f64,
    /// Resistance, per unit (distribution).
    pub r: f64,
    /// Reactance, per unit (distribution).
    pub x: f64,
    /// Real-power flow limit, per unit.
    pub flow_limit: f64,
    /// Current magnitude limit, per unit.
    pub current_limit: f64,
}

impl Line {
    pub fn transmission(from: usize, to: usize, susceptance: f64) -> Self {
        Self {
            from,
            to,
            susceptance,
            r: 0.0,
            x: 0.0,
            flow_limit: f64::INFINITY,
            current_limit: f64::INFINITY,
        }
    }

    pub fn distribution(from: usize, to: usize, r: f64, x: f64) -> Self {
        Self {
            from,
            to,
            susceptance: 0.0,
            r,
            x,
            flow_limit: f64::INFINITY,
            current_limit: f64::INFINITY,
        }
    }

    pub fn with_flow_limit(mut self, limit: f64) -> Self {
        self.flow_limit = limit;
        self
    }

    pub fn with_current_limit(mut self, limit: f64) -> Self {
        self.current_limit = limit;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    MeshedTransmission,
    RadialDistribution,
}

/// Immutable network snapshot shared by all solvers. Construct through
/// [`Network::new`], which validates the invariants once.
#[derive(Debug, Clone)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub topology: Topology,
}

impl Network {
    pub fn new(buses: Vec<Bus>, lines: Vec<Line>, topology: Topology) -> Result<Self, ModelError> {
        let net = Self {
            buses,
            lines,
            topology,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn slack(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated network has a slack bus")
    }

    /// Checks every structural invariant, reporting all violations at once.
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut issues = Vec::new();
        let n = self.buses.len();
        if n == 0 {
            issues.push("network has no buses".to_string());
        }
        for (i, bus) in self.buses.iter().enumerate() {
            if bus.id != i {
                issues.push(format!(
                    "bus ids must be contiguous from 0; index {i} has id {}",
                    bus.id
                ));
            }
            if bus.voltage_sq <= 0.0 {
                issues.push(format!("bus {}: voltage_sq must be > 0", bus.id));
            }
        }
        let slack_count = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .count();
        if slack_count != 1 {
            issues.push(format!(
                "expected exactly one slack bus, found {slack_count}"
            ));
        }
        for (l, line) in self.lines.iter().enumerate() {
            if line.from >= n || line.to >= n {
                issues.push(format!("line {l}: endpoint out of range"));
                continue;
            }
            if line.from == line.to {
                issues.push(format!("line {l}: self loop"));
            }
            match self.topology {
                Topology::MeshedTransmission => {
                    if line.susceptance <= 0.0 {
                        issues.push(format!("line {l}: susceptance must be > 0"));
                    }
                }
                Topology::RadialDistribution => {
                    if line.r < 0.0 || line.x < 0.0 {
                        issues.push(format!("line {l}: r and x must be >= 0"));
                    }
                }
            }
            if line.flow_limit <= 0.0 {
                issues.push(format!("line {l}: flow_limit must be > 0"));
            }
            if line.current_limit <= 0.0 {
                issues.push(format!("line {l}: current_limit must be > 0"));
            }
        }
        if issues.is_empty() && n > 0 {
            if !self.is_connected() {
                issues.push("network graph is not connected".to_string());
            } else if self.topology == Topology::RadialDistribution && self.lines.len() != n - 1 {
                issues.push(format!(
                    "radial network must be a tree: {} buses need {} lines, found {}",
                    n,
                    n - 1,
                    self.lines.len()
                ));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Invalid(issues))
        }
    }

    fn is_connected(&self) -> bool {
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for line in &self.lines {
            adj[line.from].push(line.to);
            adj[line.to].push(line.from);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(b) = stack.pop() {
            for &next in &adj[b] {
                if !seen[next] {
                    seen[next] = true;
                    count += 1;
                    stack.push(next);
                }
            }
        }
        count == n
    }

    /// Tree structure rooted at the slack bus: `parent[bus]` is
    /// `(parent bus, line index)`, `order` lists buses root-first.
    pub(crate) fn rooted_tree(&self) -> Result<RootedTree, ModelError> {
        let n = self.buses.len();
        let root = self.slack();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (l, line) in self.lines.iter().enumerate() {
            adj[line.from].push((line.to, l));
            adj[line.to].push((line.from, l));
        }
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut order = vec![root];
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut head = 0;
        while head < order.len() {
            let b = order[head];
            head += 1;
            for &(next, l) in &adj[b] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((b, l));
                    order.push(next);
                } else if parent[b].map(|(p, _)| p) != Some(next) {
                    return Err(ModelError::NotRadial(format!(
                        "cycle through line {l} ({} - {})",
                        self.lines[l].from, self.lines[l].to
                    )));
                }
            }
        }
        if order.len() != n {
            return Err(ModelError::NotRadial("graph is disconnected".to_string()));
        }
        Ok((parent, order))
    }
}

/// Parent pointers `(parent bus, line index)` per bus plus a root-first
/// visit order.
pub(crate) type RootedTree = (Vec<Option<(usize, usize)>>, Vec<usize>);

/// Conservative linear proxy for a current-magnitude limit:
/// `|P| + |Q| <= sqrt(2) * limit` contains the true circle constraint.
pub fn within_current_proxy(p: f64, q: f64, current_limit: f64) -> bool {
    p.abs() + q.abs() <= std::f64::consts::SQRT_2 * current_limit
}
