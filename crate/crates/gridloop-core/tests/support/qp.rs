//! Independent box-constrained QP oracle: primal active-set on the KKT
//! system. Used to check the valley-filling schedules.

use super::dense_solve;

/// `min 0.5 x'Qx + c'x` subject to `A x = b`, `lower <= x <= upper`.
pub struct BoxQp {
    pub q: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Free,
    AtLower,
    AtUpper,
}

const TOL: f64 = 1e-10;
/// Ridge regularization keeps the KKT system nonsingular when Q is only
/// positive semidefinite; the objective perturbation is ~1e-9 |x|^2.
const RIDGE: f64 = 1e-9;

impl BoxQp {
    pub fn objective(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut v = 0.0;
        for i in 0..n {
            v += self.c[i] * x[i];
            for j in 0..n {
                v += 0.5 * x[i] * self.q[i][j] * x[j];
            }
        }
        v
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| self.c[i] + (0..n).map(|j| self.q[i][j] * x[j]).sum::<f64>())
            .collect()
    }

    /// Solves from a feasible start (bounds and equalities satisfied).
    pub fn solve(&self, mut x: Vec<f64>) -> Vec<f64> {
        let n = x.len();
        let m = self.b.len();
        let mut state: Vec<State> = (0..n)
            .map(|i| {
                // permanently fixed variables (lower == upper) also start here
                if self.upper[i] - self.lower[i] <= TOL || (x[i] - self.lower[i]).abs() <= TOL {
                    State::AtLower
                } else if (x[i] - self.upper[i]).abs() <= TOL {
                    State::AtUpper
                } else {
                    State::Free
                }
            })
            .collect();

        for _iter in 0..2000 {
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == State::Free).collect();
            let nf = free.len();

            // equality-constrained subproblem on the free variables
            let dim = nf + m;
            let mut kkt = vec![vec![0.0; dim]; dim];
            let mut rhs = vec![0.0; dim];
            for (fi, &i) in free.iter().enumerate() {
                for (fj, &j) in free.iter().enumerate() {
                    kkt[fi][fj] = self.q[i][j];
                }
                // proximal ridge anchored at the current point: Q may be
                // singular on the free subspace, and anchoring keeps the
                // subproblem optimum from wandering along null directions
                kkt[fi][fi] += RIDGE;
                let mut r = -self.c[i] + RIDGE * x[i];
                for j in 0..n {
                    if state[j] != State::Free {
                        r -= self.q[i][j] * x[j];
                    }
                }
                rhs[fi] = r;
                for row in 0..m {
                    kkt[fi][nf + row] = self.a[row][i];
                    kkt[nf + row][fi] = self.a[row][i];
                }
            }
            for row in 0..m {
                let mut r = self.b[row];
                for j in 0..n {
                    if state[j] != State::Free {
                        r -= self.a[row][j] * x[j];
                    }
                }
                rhs[nf + row] = r;
                // stabilized saddle point: keeps the system nonsingular when
                // an equality row has no free columns left
                kkt[nf + row][nf + row] = -RIDGE;
            }
            let sol = dense_solve(kkt, rhs);
            let target: Vec<f64> = sol[..nf].to_vec();
            let lambda: Vec<f64> = sol[nf..].to_vec();

            // step toward the subproblem optimum, stopping at the first
            // bound; deltas at ridge-noise scale do not count as movement
            let move_tol = 1e-9;
            let mut alpha = 1.0;
            let mut blocking: Option<(usize, State)> = None;
            for (fi, &i) in free.iter().enumerate() {
                let delta = target[fi] - x[i];
                if delta > move_tol {
                    let room = (self.upper[i] - x[i]) / delta;
                    if room < alpha - 1e-12 {
                        alpha = room;
                        blocking = Some((i, State::AtUpper));
                    }
                } else if delta < -move_tol {
                    let room = (self.lower[i] - x[i]) / delta;
                    if room < alpha - 1e-12 {
                        alpha = room;
                        blocking = Some((i, State::AtLower));
                    }
                }
            }
            let alpha = alpha.clamp(0.0, 1.0);
            for (fi, &i) in free.iter().enumerate() {
                x[i] += alpha * (target[fi] - x[i]);
            }
            if let Some((i, s)) = blocking {
                x[i] = match s {
                    State::AtLower => self.lower[i],
                    State::AtUpper => self.upper[i],
                    State::Free => unreachable!(),
                };
                state[i] = s;
                continue;
            }

            // at the subproblem optimum: check bound multipliers. A row
            // with no free columns gets a degenerate multiplier from the
            // KKT solve, so rebuild it from its fixed block's dual interval
            // [max over upper-bound gradients, min over lower-bound ones].
            let g = self.gradient(&x);
            let mut lambda = lambda;
            for row in 0..m {
                if free.iter().any(|&i| self.a[row][i] != 0.0) {
                    continue;
                }
                let mut lo_edge = f64::NEG_INFINITY;
                let mut hi_edge = f64::INFINITY;
                for i in 0..n {
                    if self.a[row][i] == 0.0 || self.upper[i] - self.lower[i] <= TOL {
                        continue;
                    }
                    match state[i] {
                        State::AtUpper => lo_edge = lo_edge.max(g[i]),
                        State::AtLower => hi_edge = hi_edge.min(g[i]),
                        State::Free => unreachable!("row has no free columns"),
                    }
                }
                // the KKT solve returns multipliers for `Qx + A'l = -c`,
                // i.e. the negative of the g - A'lambda convention below
                lambda[row] = -if lo_edge.is_finite() && hi_edge.is_finite() {
                    0.5 * (lo_edge + hi_edge)
                } else if lo_edge.is_finite() {
                    lo_edge
                } else if hi_edge.is_finite() {
                    hi_edge
                } else {
                    0.0
                };
            }
            let reduced = |i: usize| -> f64 {
                g[i] + (0..m).map(|row| self.a[row][i] * lambda[row]).sum::<f64>()
            };
            let mut release = None;
            for i in 0..n {
                if self.upper[i] - self.lower[i] <= TOL {
                    continue; // permanently fixed
                }
                match state[i] {
                    State::AtLower if reduced(i) < -1e-8 => {
                        release = Some(i);
                        break;
                    }
                    State::AtUpper if reduced(i) > 1e-8 => {
                        release = Some(i);
                        break;
                    }
                    _ => {}
                }
            }
            match release {
                Some(i) => state[i] = State::Free,
                None => return x,
            }
        }
        panic!("QP oracle did not converge");
    }
}

/// Builds the valley-filling QP for EV sessions: variables `w[n][k]`
/// flattened row-major, per-EV energy equalities, charging-window boxes.
pub fn valley_qp(
    windows: &[(usize, usize, f64)], // (k_start, k_end inclusive, rate_max)
    required_sum: &[f64],
    base_load: &[f64],
) -> (BoxQp, Vec<f64>) {
    let n_ev = windows.len();
    let k = base_load.len();
    let n = n_ev * k;
    let idx = |ev: usize, slot: usize| ev * k + slot;

    let mut q = vec![vec![0.0; n]; n];
    let mut c = vec![0.0; n];
    for slot in 0..k {
        for e1 in 0..n_ev {
            c[idx(e1, slot)] = 2.0 * base_load[slot];
            for e2 in 0..n_ev {
                q[idx(e1, slot)][idx(e2, slot)] = 2.0;
            }
        }
    }
    let mut a = vec![vec![0.0; n]; n_ev];
    let lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for (ev, &(ks, ke, rate)) in windows.iter().enumerate() {
        for slot in ks..=ke {
            a[ev][idx(ev, slot)] = 1.0;
            upper[idx(ev, slot)] = rate;
        }
    }

    // feasible start: greedy fill from the window start
    let mut x0 = vec![0.0; n];
    for (ev, &(ks, ke, rate)) in windows.iter().enumerate() {
        let mut remaining = required_sum[ev];
        for slot in ks..=ke {
            let take = remaining.min(rate);
            x0[idx(ev, slot)] = take;
            remaining -= take;
            if remaining <= 0.0 {
                break;
            }
        }
        assert!(remaining <= 1e-9, "oracle start infeasible for ev {ev}");
    }

    (
        BoxQp {
            q,
            c,
            a,
            b: required_sum.to_vec(),
            lower,
            upper,
        },
        x0,
    )
}

/// The valley objective `sum_k (D_k + sum_n w_nk)^2` for a flattened `x`.
pub fn valley_objective(x: &[f64], n_ev: usize, base_load: &[f64]) -> f64 {
    let k = base_load.len();
    (0..k)
        .map(|slot| {
            let agg: f64 = base_load[slot] + (0..n_ev).map(|ev| x[ev * k + slot]).sum::<f64>();
            agg * agg
        })
        .sum()
}
