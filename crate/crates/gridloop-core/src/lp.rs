//! Bounded-variable two-phase tableau simplex.
//!
//! All optimization in this crate reduces to small dense linear programs
//! (tens to hundreds of variables), so a textbook primal simplex with
//! explicit variable bounds is enough. Bland's rule everywhere makes the
//! pivot sequence deterministic and cycle-free. Tolerances follow the
//! module contracts: 1e-9 on feasibility, 1e-7 on optimality.
//!
//! Rows carry labels so infeasibility reports can name the violated
//! constraint.

use thiserror::Error;

pub const FEAS_TOL: f64 = 1e-9;
pub const OPT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub label: String,
}

/// Linear program `min c.x` over box-bounded variables and labelled rows.
/// Lower bounds must be finite; upper bounds may be `f64::INFINITY`.
#[derive(Debug, Clone)]
pub struct LpProblem {
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<LpRow>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("infeasible; violated: {}", .violated.join(", "))]
    Infeasible { violated: Vec<String> },
    #[error("unbounded")]
    Unbounded,
    #[error("bad model: {0}")]
    BadModel(String),
}

impl LpProblem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            cost: vec![0.0; num_vars],
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn set_cost(&mut self, var: usize, c: f64) {
        self.cost[var] = c;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        assert!(lower.is_finite(), "lower bounds must be finite");
        assert!(lower <= upper, "empty bound interval on var {var}");
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn add_row(
        &mut self,
        sense: Sense,
        rhs: f64,
        coeffs: Vec<(usize, f64)>,
        label: impl Into<String>,
    ) {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.num_vars()));
        self.rows.push(LpRow {
            coeffs,
            sense,
            rhs,
            label: label.into(),
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BoundState {
    AtLower,
    AtUpper,
}

struct Tableau {
    m: usize,
    /// total columns: structural + slack + artificial
    n: usize,
    t: Vec<f64>,
    obj: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    /// values of the basic variables, row by row
    xb: Vec<f64>,
    /// bound state of every nonbasic column
    state: Vec<BoundState>,
    row_labels: Vec<String>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.n + c]
    }

    #[inline]
    fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.t[r * self.n + c]
    }

    fn bound_value(&self, col: usize) -> f64 {
        match self.state[col] {
            BoundState::AtLower => self.lower[col],
            BoundState::AtUpper => self.upper[col],
        }
    }

    #[inline]
    fn is_basic(&self, col: usize) -> bool {
        self.in_basis[col]
    }

    /// Prices the objective row out against the current basis.
    fn price_out(&mut self, cost: &[f64]) {
        self.obj.copy_from_slice(cost);
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            for c in 0..self.n {
                let v = self.at(r, c);
                if v != 0.0 {
                    self.obj[c] -= cb * v;
                }
            }
        }
    }

    /// One simplex phase; `cost` must already be priced out into `obj`.
    fn optimize(&mut self) -> Result<(), LpError> {
        let iter_cap = 200 * (self.m + self.n) + 1000;
        for _ in 0..iter_cap {
            // Bland: smallest-index eligible entering column
            let mut entering = None;
            for j in 0..self.n {
                if self.is_basic(j) || self.lower[j] == self.upper[j] {
                    continue;
                }
                let d = self.obj[j];
                let eligible = match self.state[j] {
                    BoundState::AtLower => d < -OPT_TOL,
                    BoundState::AtUpper => d > OPT_TOL,
                };
                if eligible {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else { return Ok(()) };
            let dir = match self.state[j] {
                BoundState::AtLower => 1.0,
                BoundState::AtUpper => -1.0,
            };

            // ratio test: how far can x_j move before something hits a bound
            let mut t_star = self.upper[j] - self.lower[j]; // bound flip distance
            let mut leave: Option<(usize, BoundState)> = None;
            for r in 0..self.m {
                let a = self.at(r, j) * dir;
                if a.abs() <= FEAS_TOL {
                    continue;
                }
                let b = self.basis[r];
                let (limit, hits) = if a > 0.0 {
                    ((self.xb[r] - self.lower[b]) / a, BoundState::AtLower)
                } else {
                    ((self.upper[b] - self.xb[r]) / -a, BoundState::AtUpper)
                };
                let limit = limit.max(0.0);
                if limit < t_star - FEAS_TOL {
                    t_star = limit;
                    leave = Some((r, hits));
                } else if limit < t_star + FEAS_TOL {
                    // tie: Bland again, smallest basic column index wins
                    if let Some((r0, _)) = leave {
                        if self.basis[r] < self.basis[r0] {
                            leave = Some((r, hits));
                        }
                    } else if limit < t_star {
                        t_star = limit;
                        leave = Some((r, hits));
                    }
                }
            }
            if !t_star.is_finite() {
                return Err(LpError::Unbounded);
            }
            let delta = dir * t_star;

            match leave {
                None => {
                    // bound flip, no basis change
                    for r in 0..self.m {
                        let a = self.at(r, j);
                        self.xb[r] -= a * delta;
                    }
                    self.state[j] = match self.state[j] {
                        BoundState::AtLower => BoundState::AtUpper,
                        BoundState::AtUpper => BoundState::AtLower,
                    };
                }
                Some((r, hits)) => {
                    let entering_value = self.bound_value(j) + delta;
                    for i in 0..self.m {
                        if i != r {
                            let a = self.at(i, j);
                            self.xb[i] -= a * delta;
                        }
                    }
                    let leaving = self.basis[r];
                    self.state[leaving] = hits;
                    self.in_basis[leaving] = false;
                    self.in_basis[j] = true;
                    self.xb[r] = entering_value;
                    self.basis[r] = j;
                    self.pivot(r, j);
                }
            }
        }
        Err(LpError::BadModel(
            "simplex iteration cap exceeded".to_string(),
        ))
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let pivot = self.at(r, j);
        debug_assert!(pivot.abs() > FEAS_TOL, "pivot too small");
        let inv = 1.0 / pivot;
        for c in 0..self.n {
            *self.at_mut(r, c) *= inv;
        }
        *self.at_mut(r, j) = 1.0;
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let factor = self.at(i, j);
            if factor == 0.0 {
                continue;
            }
            for c in 0..self.n {
                let v = self.at(r, c);
                if v != 0.0 {
                    *self.at_mut(i, c) -= factor * v;
                }
            }
            *self.at_mut(i, j) = 0.0;
        }
        let factor = self.obj[j];
        if factor != 0.0 {
            for c in 0..self.n {
                let v = self.at(r, c);
                if v != 0.0 {
                    self.obj[c] -= factor * v;
                }
            }
            self.obj[j] = 0.0;
        }
    }
}

/// Solves the program. Deterministic: identical problems give bit-identical
/// solutions.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution, LpError> {
    let n_struct = p.num_vars();
    let m = p.rows.len();
    let n_slack = p.rows.iter().filter(|r| r.sense != Sense::Eq).count();
    let n = n_struct + n_slack + m;
    let n_art_start = n_struct + n_slack;

    let mut tab = Tableau {
        m,
        n,
        t: vec![0.0; m * n],
        obj: vec![0.0; n],
        lower: vec![0.0; n],
        upper: vec![f64::INFINITY; n],
        basis: Vec::with_capacity(m),
        in_basis: vec![false; n],
        xb: vec![0.0; m],
        state: vec![BoundState::AtLower; n],
        row_labels: p.rows.iter().map(|r| r.label.clone()).collect(),
    };
    tab.lower[..n_struct].copy_from_slice(&p.lower);
    tab.upper[..n_struct].copy_from_slice(&p.upper);

    // variables start nonbasic at their lower bound
    let mut slack_idx = n_struct;
    for (r, row) in p.rows.iter().enumerate() {
        let mut residual = row.rhs;
        for &(j, a) in &row.coeffs {
            *tab.at_mut(r, j) += a;
            residual -= a * p.lower[j];
        }
        if row.sense != Sense::Eq {
            let sign = if row.sense == Sense::Le { 1.0 } else { -1.0 };
            *tab.at_mut(r, slack_idx) = sign;
            slack_idx += 1;
        }
        // artificial column carries the residual; flip the row if negative
        if residual < 0.0 {
            for c in 0..n {
                *tab.at_mut(r, c) = -tab.at(r, c);
            }
            residual = -residual;
        }
        let art = n_art_start + r;
        *tab.at_mut(r, art) = 1.0;
        tab.basis.push(art);
        tab.in_basis[art] = true;
        tab.xb[r] = residual;
    }

    // phase 1: drive the artificials to zero
    let mut phase1_cost = vec![0.0; n];
    for c in n_art_start..n {
        phase1_cost[c] = 1.0;
    }
    tab.price_out(&phase1_cost);
    tab.optimize()?;
    let infeas: f64 = (0..m)
        .filter(|&r| tab.basis[r] >= n_art_start)
        .map(|r| tab.xb[r])
        .sum();
    if infeas > 1e-7 {
        let violated: Vec<String> = (0..m)
            .filter(|&r| tab.basis[r] >= n_art_start && tab.xb[r] > 1e-7)
            .map(|r| tab.row_labels[tab.basis[r] - n_art_start].clone())
            .collect();
        return Err(LpError::Infeasible { violated });
    }

    // pivot degenerate artificials out of the basis where possible; a fully
    // zero row is redundant and keeps its artificial basic at zero
    for r in 0..m {
        if tab.basis[r] < n_art_start {
            continue;
        }
        let col = (0..n_art_start).find(|&c| !tab.is_basic(c) && tab.at(r, c).abs() > 1e-7);
        if let Some(c) = col {
            let old = tab.basis[r];
            tab.state[old] = BoundState::AtLower;
            tab.in_basis[old] = false;
            tab.in_basis[c] = true;
            tab.basis[r] = c;
            // degenerate pivot: the entering variable keeps its bound value
            tab.xb[r] = tab.bound_value(c);
            tab.pivot(r, c);
        }
    }
    // artificials are now fixed at zero
    for c in n_art_start..n {
        tab.upper[c] = 0.0;
    }

    // phase 2
    let mut phase2_cost = vec![0.0; n];
    phase2_cost[..n_struct].copy_from_slice(&p.cost);
    tab.price_out(&phase2_cost);
    tab.optimize()?;

    let mut x = vec![0.0; n_struct];
    for j in 0..n_struct {
        x[j] = tab.bound_value(j);
    }
    for r in 0..m {
        let b = tab.basis[r];
        if b < n_struct {
            x[b] = tab.xb[r];
        }
    }
    let objective = p.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_binding() {
        // min -x s.t. x <= 10, 0 <= x <= 100
        let mut p = LpProblem::new(1);
        p.set_cost(0, -1.0);
        p.set_bounds(0, 0.0, 100.0);
        p.add_row(Sense::Le, 10.0, vec![(0, 1.0)], "cap");
        let s = solve_lp(&p).unwrap();
        assert!((s.x[0] - 10.0).abs() < 1e-9);
        assert!((s.objective + 10.0).abs() < 1e-9);
    }

    #[test]
    fn bound_flip_only() {
        // no rows: optimum sits at the upper bound
        let mut p = LpProblem::new(1);
        p.set_cost(0, -1.0);
        p.set_bounds(0, 0.0, 3.0);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.x[0], 3.0);
    }

    #[test]
    fn equality_and_mix() {
        // min 2a + 3b s.t. a + b >= 4, a <= 3 (row), 0 <= a,b <= 10
        let mut p = LpProblem::new(2);
        p.set_cost(0, 2.0);
        p.set_cost(1, 3.0);
        p.set_bounds(0, 0.0, 10.0);
        p.set_bounds(1, 0.0, 10.0);
        p.add_row(Sense::Ge, 4.0, vec![(0, 1.0), (1, 1.0)], "demand");
        p.add_row(Sense::Le, 3.0, vec![(0, 1.0)], "a cap");
        let s = solve_lp(&p).unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-9);
        assert!((s.x[1] - 1.0).abs() < 1e-9);
        assert!((s.objective - 9.0).abs() < 1e-9);
    }

    #[test]
    fn equality_row() {
        // min x + 2y s.t. x + y = 1
        let mut p = LpProblem::new(2);
        p.set_cost(0, 1.0);
        p.set_cost(1, 2.0);
        p.set_bounds(0, 0.0, 1.0);
        p.set_bounds(1, 0.0, 1.0);
        p.add_row(Sense::Eq, 1.0, vec![(0, 1.0), (1, 1.0)], "balance");
        let s = solve_lp(&p).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-9);
        assert!(s.x[1].abs() < 1e-9);
        assert!((s.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_names_row() {
        let mut p = LpProblem::new(1);
        p.set_bounds(0, 0.0, 1.0);
        p.add_row(Sense::Ge, 2.0, vec![(0, 1.0)], "demand floor");
        match solve_lp(&p) {
            Err(LpError::Infeasible { violated }) => {
                assert_eq!(violated, vec!["demand floor".to_string()]);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn negative_lower_bounds() {
        // min |x| style: min y s.t. y >= x, y >= -x, x = -2
        let mut p = LpProblem::new(2);
        p.set_cost(1, 1.0);
        p.set_bounds(0, -5.0, 5.0);
        p.set_bounds(1, 0.0, 10.0);
        p.add_row(Sense::Eq, -2.0, vec![(0, 1.0)], "fix x");
        p.add_row(Sense::Ge, 0.0, vec![(1, 1.0), (0, -1.0)], "abs+");
        p.add_row(Sense::Ge, 0.0, vec![(1, 1.0), (0, 1.0)], "abs-");
        let s = solve_lp(&p).unwrap();
        assert!((s.x[0] + 2.0).abs() < 1e-9);
        assert!((s.x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_rows_ok() {
        let mut p = LpProblem::new(1);
        p.set_cost(0, 1.0);
        p.set_bounds(0, 0.0, 5.0);
        p.add_row(Sense::Eq, 2.0, vec![(0, 1.0)], "fix");
        p.add_row(Sense::Eq, 4.0, vec![(0, 2.0)], "fix again");
        let s = solve_lp(&p).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic() {
        let build = || {
            let mut p = LpProblem::new(3);
            for j in 0..3 {
                p.set_cost(j, [1.0, 1.0, 1.0][j]);
                p.set_bounds(j, 0.0, 4.0);
            }
            p.add_row(Sense::Ge, 6.0, vec![(0, 1.0), (1, 1.0), (2, 1.0)], "sum");
            p
        };
        let a = solve_lp(&build()).unwrap();
        let b = solve_lp(&build()).unwrap();
        for (x, y) in a.x.iter().zip(&b.x) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
