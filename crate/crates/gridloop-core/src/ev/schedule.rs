//! Valley-filling charging schedules, centralized and decentralized.

use super::{charging_bound, EvError, EvSession};

/// Per-EV per-slot charging rates, kW. Row `n` belongs to `sessions[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargingProfile {
    pub rates: Vec<Vec<f64>>,
}

impl ChargingProfile {
    pub fn aggregate(&self, base_load: &[f64]) -> Vec<f64> {
        let mut agg = base_load.to_vec();
        for row in &self.rates {
            for (a, w) in agg.iter_mut().zip(row) {
                *a += w;
            }
        }
        agg
    }

    /// The valley-filling objective `sum_k aggregate^2`.
    pub fn objective(&self, base_load: &[f64]) -> f64 {
        self.aggregate(base_load).iter().map(|a| a * a).sum()
    }
}

/// Exact projection of `target` onto one EV's constraint set
/// `{0 <= w[k] <= bound(k), sum_k w[k] = required}`.
///
/// The minimizer is `w[k] = clip(target[k] + mu, 0, bound[k])` with the
/// multiplier `mu` found by bisection to 1e-10.
pub fn ev_local_project(
    target: &[f64],
    session: &EvSession,
    dk_h: f64,
) -> Result<Vec<f64>, EvError> {
    let horizon = target.len();
    session.validate(horizon, dk_h)?;
    let bounds: Vec<f64> = (0..horizon).map(|k| charging_bound(session, k)).collect();
    let required = session.required_rate_sum(dk_h);
    let available: f64 = bounds.iter().sum();
    if required > available + 1e-9 || required < -1e-12 {
        return Err(EvError::ProjectionInfeasible {
            required: required * dk_h,
            available: available * dk_h,
        });
    }

    let sum_at = |mu: f64| -> f64 {
        bounds
            .iter()
            .zip(target)
            .map(|(&ub, &t)| (t + mu).clamp(0.0, ub))
            .sum()
    };

    // bracket the monotone multiplier
    let t_max = target.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let t_min = target.iter().cloned().fold(f64::INFINITY, f64::min);
    let ub_max = bounds.iter().cloned().fold(0.0, f64::max);
    let mut lo = -t_max - 1.0; // all slots clipped to zero
    let mut hi = ub_max - t_min + 1.0; // all slots clipped to their bound
    for _ in 0..200 {
        if hi - lo <= 1e-10 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) < required {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    Ok(bounds
        .iter()
        .zip(target)
        .map(|(&ub, &t)| (t + mu).clamp(0.0, ub))
        .collect())
}

const PG_OBJECTIVE_TOL: f64 = 1e-8;
const PG_MAX_ITERS: usize = 500_000;

/// Centralized valley filling by projected gradient on
/// `sum_k (D[k] + sum_n w_n[k])^2`, iterated until the objective decrease
/// falls below 1e-8.
pub fn centralized_schedule(
    sessions: &[EvSession],
    base_load: &[f64],
    horizon_slots: usize,
    dk_h: f64,
) -> Result<ChargingProfile, EvError> {
    check_inputs(sessions, base_load, horizon_slots, dk_h)?;
    let n = sessions.len();
    let mut profile = ChargingProfile {
        rates: sessions
            .iter()
            .map(|s| ev_local_project(&vec![0.0; horizon_slots], s, dk_h))
            .collect::<Result<_, _>>()?,
    };
    if n == 0 {
        return Ok(profile);
    }
    let step = 1.0 / (2.0 * n as f64);
    let mut prev_obj = profile.objective(base_load);
    for _ in 0..PG_MAX_ITERS {
        let agg = profile.aggregate(base_load);
        for (row, session) in profile.rates.iter_mut().zip(sessions) {
            let target: Vec<f64> = row
                .iter()
                .zip(&agg)
                .map(|(&w, &a)| w - step * 2.0 * a)
                .collect();
            *row = ev_local_project(&target, session, dk_h)?;
        }
        let obj = profile.objective(base_load);
        if prev_obj - obj < PG_OBJECTIVE_TOL {
            return Ok(profile);
        }
        prev_obj = obj;
    }
    Err(EvError::InvalidInput(
        "projected gradient did not reach the objective tolerance".to_string(),
    ))
}

/// Outcome of the aggregator/charger protocol.
#[derive(Debug, Clone)]
pub struct DecentralizedRun {
    pub profile: ChargingProfile,
    pub iterations: usize,
    /// Final broadcast price, one entry per slot.
    pub price: Vec<f64>,
}

/// Synchronous-round decentralized protocol. Each round the aggregator
/// broadcasts the price `p[k] = gamma * 2 * (D[k] + sum_n w_n[k])` and every
/// charger solves `min_w sum_k p[k] w[k] + 0.5 ||w - w_prev||^2` over its
/// local set, which is the projection of `w_prev - p`. Rounds stop when no
/// rate moves more than 1e-6 kW.
pub fn decentralized_schedule(
    sessions: &[EvSession],
    base_load: &[f64],
    horizon_slots: usize,
    dk_h: f64,
    gamma: f64,
    max_iters: usize,
) -> Result<DecentralizedRun, EvError> {
    check_inputs(sessions, base_load, horizon_slots, dk_h)?;
    if gamma <= 0.0 {
        return Err(EvError::InvalidInput("gamma must be > 0".to_string()));
    }
    let mut profile = ChargingProfile {
        rates: sessions
            .iter()
            .map(|s| ev_local_project(&vec![0.0; horizon_slots], s, dk_h))
            .collect::<Result<_, _>>()?,
    };
    if sessions.is_empty() {
        return Ok(DecentralizedRun {
            profile,
            iterations: 0,
            price: base_load.iter().map(|d| 2.0 * gamma * d).collect(),
        });
    }
    let mut residual = f64::INFINITY;
    for round in 1..=max_iters {
        let agg = profile.aggregate(base_load);
        let price: Vec<f64> = agg.iter().map(|&a| gamma * 2.0 * a).collect();
        residual = 0.0;
        for (row, session) in profile.rates.iter_mut().zip(sessions) {
            let target: Vec<f64> = row.iter().zip(&price).map(|(&w, &p)| w - p).collect();
            let next = ev_local_project(&target, session, dk_h)?;
            for (old, new) in row.iter().zip(&next) {
                residual = residual.max((old - new).abs());
            }
            *row = next;
        }
        if residual < 1e-6 {
            let agg = profile.aggregate(base_load);
            let price = agg.iter().map(|&a| gamma * 2.0 * a).collect();
            return Ok(DecentralizedRun {
                profile,
                iterations: round,
                price,
            });
        }
    }
    Err(EvError::NonConvergence {
        residual,
        iterations: max_iters,
    })
}

fn check_inputs(
    sessions: &[EvSession],
    base_load: &[f64],
    horizon_slots: usize,
    dk_h: f64,
) -> Result<(), EvError> {
    if base_load.len() != horizon_slots {
        return Err(EvError::InvalidInput(format!(
            "base load has {} slots, horizon is {horizon_slots}",
            base_load.len()
        )));
    }
    if dk_h <= 0.0 {
        return Err(EvError::InvalidInput("slot length must be > 0".to_string()));
    }
    for s in sessions {
        s.validate(horizon_slots, dk_h)?;
    }
    Ok(())
}
