//! Shared oracles for integration and acceptance tests. Everything here is
//! deliberately independent of the library's solver paths: fresh
//! elimination code, closed-form flow algebra, exhaustive enumeration.
#![allow(dead_code)]

pub mod qp;

use gridloop_core::dispatch::Generator;

/// Gaussian elimination with partial pivoting, local to the oracles.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        assert!(a[col][col].abs() > 1e-14, "oracle system is singular");
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * b[k];
        }
        b[col] = acc / a[col][col];
    }
    b
}

/// A randomized three-bus dispatch instance on the fixed triangle network
/// (lines 0-1, 1-2, 0-2 with susceptances 10, 10, 5; line 0-1 flow-limited).
#[derive(Debug, Clone)]
pub struct TriangleInstance {
    pub gens: Vec<Generator>,
    pub demand_mw: [f64; 3],
    pub limit_pu: f64,
    pub s_base_mva: f64,
}

pub const TRIANGLE_SUSCEPTANCE: [f64; 3] = [10.0, 10.0, 5.0];

/// Closed-form DC flows for the triangle given bus injections (pu), slack
/// at bus 0: solve the 2x2 reduced system by hand.
pub fn triangle_flows(injection_pu: [f64; 3]) -> [f64; 3] {
    let (b01, b12, b02) = (
        TRIANGLE_SUSCEPTANCE[0],
        TRIANGLE_SUSCEPTANCE[1],
        TRIANGLE_SUSCEPTANCE[2],
    );
    let a11 = b01 + b12;
    let a12 = -b12;
    let a22 = b12 + b02;
    let det = a11 * a22 - a12 * a12;
    let t1 = (injection_pu[1] * a22 - a12 * injection_pu[2]) / det;
    let t2 = (a11 * injection_pu[2] - injection_pu[1] * a12) / det;
    [b01 * (0.0 - t1), b12 * (t1 - t2), b02 * (0.0 - t2)]
}

/// Exhaustive dispatch oracle on a 0.01 MW grid over the two free generator
/// outputs (the third closes the balance). Returns (outputs, cost).
pub fn triangle_grid_search(inst: &TriangleInstance) -> Option<([f64; 3], f64)> {
    let step = 0.01;
    let total: f64 = inst.demand_mw.iter().sum();
    let g = &inst.gens;
    let mut best: Option<([f64; 3], f64)> = None;
    let n0 = (g[0].p_max / step).round() as usize;
    let n1 = (g[1].p_max / step).round() as usize;
    for i0 in 0..=n0 {
        let p0 = i0 as f64 * step;
        for i1 in 0..=n1 {
            let p1 = i1 as f64 * step;
            let p2 = total - p0 - p1;
            if !(-1e-9..=g[2].p_max + 1e-9).contains(&p2) {
                continue;
            }
            let inj = [
                (p0 - inst.demand_mw[0]) / inst.s_base_mva,
                (p1 - inst.demand_mw[1]) / inst.s_base_mva,
                (p2 - inst.demand_mw[2]) / inst.s_base_mva,
            ];
            let flows = triangle_flows(inj);
            if flows[0].abs() > inst.limit_pu + 1e-9 {
                continue;
            }
            let cost = g[0].energy_cost(p0) + g[1].energy_cost(p1) + g[2].energy_cost(p2.max(0.0));
            let better = match &best {
                None => true,
                Some((_, bc)) => cost < bc - 1e-12,
            };
            if better {
                best = Some(([p0, p1, p2], cost));
            }
        }
    }
    best
}

/// Optimal continuous dispatch of committed single-or-multi-segment units
/// with p_min support and no network limits: everyone at p_min, then fill
/// remaining demand through the cheapest available segments. Exchange
/// argument makes this exact for convex costs.
pub fn merit_order_cost(gens: &[Generator], committed: &[bool], demand: f64) -> Option<f64> {
    let mut base = 0.0;
    let mut remaining = demand;
    // (price, available width) per segment above p_min
    let mut offers: Vec<(f64, f64)> = Vec::new();
    for (g, &on) in gens.iter().zip(committed) {
        if !on {
            continue;
        }
        base += g.energy_cost(g.p_min);
        remaining -= g.p_min;
        let mut below = g.p_min;
        for seg in &g.segments {
            let above = (seg.mw - below.max(0.0)).max(0.0);
            if above > 0.0 {
                offers.push((seg.price, above));
            }
            below -= seg.mw;
        }
    }
    if remaining < -1e-9 {
        return None; // demand below the sum of minimums
    }
    offers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut cost = base;
    let mut left = remaining.max(0.0);
    for (price, width) in offers {
        if left <= 1e-12 {
            break;
        }
        let take = left.min(width);
        cost += take * price;
        left -= take;
    }
    if left > 1e-9 {
        return None; // capacity shortfall
    }
    Some(cost)
}

/// Exhaustive unit-commitment oracle: enumerates every on/off schedule
/// (hour-major, unit-minor bit order), costs each with the merit-order
/// dispatch, and keeps the lexicographically smallest optimum.
pub fn uc_enumeration_oracle(
    gens: &[Generator],
    hourly_demand: &[f64],
) -> Option<(Vec<Vec<bool>>, f64)> {
    let units = gens.len();
    let hours = hourly_demand.len();
    let bits = units * hours;
    assert!(bits <= 20, "oracle is exhaustive");
    let mut best: Option<(Vec<Vec<bool>>, f64)> = None;
    for mask in 0..(1u32 << bits) {
        // bit (h * units + u) read so that ascending masks scan the
        // hour-major unit-minor vector lexicographically
        let on_at = |h: usize, u: usize| (mask >> (bits - 1 - (h * units + u))) & 1 == 1;
        let mut cost = 0.0;
        let mut feasible = true;
        for h in 0..hours {
            let committed: Vec<bool> = (0..units).map(|u| on_at(h, u)).collect();
            match merit_order_cost(gens, &committed, hourly_demand[h]) {
                Some(c) => cost += c,
                None => {
                    feasible = false;
                    break;
                }
            }
            for u in 0..units {
                let was_on = h > 0 && on_at(h - 1, u);
                if on_at(h, u) && !was_on {
                    cost += gens[u].startup_cost;
                }
            }
        }
        if !feasible {
            continue;
        }
        let better = match &best {
            None => true,
            Some((_, bc)) => cost < bc - 1e-6,
        };
        if better {
            let schedule: Vec<Vec<bool>> = (0..hours)
                .map(|h| (0..units).map(|u| on_at(h, u)).collect())
                .collect();
            best = Some((schedule, cost));
        }
    }
    best
}
