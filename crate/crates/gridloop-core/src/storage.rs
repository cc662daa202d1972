//! Battery energy storage participation in a pay-for-performance
//! regulation market.
//!
//! The battery follows a clipped-tracking policy: at each interval it aims
//! for `C * r[k]` and is clipped by its power rating and by what the SOC
//! bounds admit. That reduces the participation problem to a one-dimensional
//! search over the capacity `C`, handled by a coarse scan plus
//! golden-section refinement. A fraction `epsilon` of signal scenarios may
//! fail the performance floor (chance-constraint handling).
//!
//! SOC dynamics: charging gains `dt * gamma * b`, discharging drains
//! `dt * b / gamma`, so round trips lose energy on both legs.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundDirection {
    Above,
    Below,
}

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("soc would move {direction:?} its bound: {value} vs {bound} MWh")]
    SocBound {
        direction: BoundDirection,
        value: f64,
        bound: f64,
    },
    #[error("dispatch length {dispatch} != signal length {signal}")]
    LengthMismatch { dispatch: usize, signal: usize },
    #[error("dispatch {b} MW exceeds power rating {rating} MW")]
    PowerRatingExceeded { b: f64, rating: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Battery parameters. Charging and discharging share one efficiency
/// coefficient in `(0, 1]`.
#[derive(Debug, Clone)]
pub struct BesConfig {
    /// Maximum market capacity, MW.
    pub capacity_max: f64,
    /// Power rating, MW.
    pub power_rating: f64,
    /// SOC lower bound, MWh.
    pub soc_min: f64,
    /// SOC upper bound, MWh.
    pub soc_max: f64,
    /// SOC at the start of the horizon, MWh.
    pub soc_initial: f64,
    /// Efficiency coefficient, in (0, 1].
    pub efficiency: f64,
    /// Dispatch interval length, hours.
    pub interval_h: f64,
    /// Aging cost per MWh of throughput, $.
    pub aging_coeff: f64,
}

impl BesConfig {
    pub fn validate(&self) -> Result<(), StorageError> {
        let fail = |m: &str| Err(StorageError::InvalidInput(m.to_string()));
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return fail("efficiency must be in (0, 1]");
        }
        if self.soc_min >= self.soc_max {
            return fail("need soc_min < soc_max");
        }
        if self.power_rating <= 0.0 {
            return fail("power_rating must be > 0");
        }
        if self.capacity_max < 0.0 {
            return fail("capacity_max must be >= 0");
        }
        if self.interval_h <= 0.0 {
            return fail("interval_h must be > 0");
        }
        if !(self.soc_min..=self.soc_max).contains(&self.soc_initial) {
            return fail("soc_initial must lie within the SOC bounds");
        }
        Ok(())
    }
}

/// One regulation-market scenario: a price, a performance floor, and the
/// signal trajectory with `r[k]` in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct RegulationMarket {
    /// Capacity payment over the horizon, $/MW.
    pub price: f64,
    /// Minimum acceptable performance score.
    pub performance_floor: f64,
    pub signal: Vec<f64>,
}

impl RegulationMarket {
    pub fn validate(&self) -> Result<(), StorageError> {
        if !(0.0..=1.0).contains(&self.performance_floor) {
            return Err(StorageError::InvalidInput(
                "performance_floor must be in [0, 1]".to_string(),
            ));
        }
        if self.signal.iter().any(|r| !(-1.0..=1.0).contains(r)) {
            return Err(StorageError::InvalidInput(
                "regulation signal values must be in [-1, 1]".to_string(),
            ));
        }
        Ok(())
    }
}

/// Realized dispatch against one scenario signal.
#[derive(Debug, Clone)]
pub struct ScenarioTrace {
    pub dispatch: Vec<f64>,
    /// SOC after each interval, MWh; `soc[k]` follows `dispatch[k]`.
    pub soc: Vec<f64>,
    pub score: f64,
    /// Net revenue: price * C * score - aging cost, $.
    pub revenue: f64,
}

/// Chosen capacity plus the realized trace per scenario.
#[derive(Debug, Clone)]
pub struct BesPlan {
    pub capacity: f64,
    pub traces: Vec<ScenarioTrace>,
    /// Mean score across scenarios.
    pub score: f64,
    /// Mean net revenue across scenarios, $.
    pub revenue: f64,
    /// False when no positive capacity met the performance floor on the
    /// required scenario fraction and the plan fell back to C = 0.
    pub floor_attainable: bool,
}

/// Advances the SOC by one interval:
/// `e = e_prev + dt*gamma*relu(b) - dt*relu(-b)/gamma`.
///
/// Errors if the dispatch exceeds the power rating or the resulting SOC
/// leaves its bounds (1e-9 MWh slack absorbs roundoff from callers that
/// clip exactly to a bound).
pub fn soc_step(e_prev: f64, b: f64, cfg: &BesConfig) -> Result<f64, StorageError> {
    if b.abs() > cfg.power_rating + 1e-9 {
        return Err(StorageError::PowerRatingExceeded {
            b,
            rating: cfg.power_rating,
        });
    }
    let charge = b.max(0.0);
    let discharge = (-b).max(0.0);
    let e = e_prev + cfg.interval_h * cfg.efficiency * charge
        - cfg.interval_h * discharge / cfg.efficiency;
    if e > cfg.soc_max + 1e-9 {
        return Err(StorageError::SocBound {
            direction: BoundDirection::Above,
            value: e,
            bound: cfg.soc_max,
        });
    }
    if e < cfg.soc_min - 1e-9 {
        return Err(StorageError::SocBound {
            direction: BoundDirection::Below,
            value: e,
            bound: cfg.soc_min,
        });
    }
    Ok(e)
}

/// Normalized L1 tracking accuracy in `[0, 1]`.
///
/// Degenerate conventions: with `C = 0` or an all-zero signal the score is
/// 1 when the battery also stayed silent, else 0.
pub fn performance_score(
    capacity: f64,
    dispatch: &[f64],
    signal: &[f64],
) -> Result<f64, StorageError> {
    if dispatch.len() != signal.len() {
        return Err(StorageError::LengthMismatch {
            dispatch: dispatch.len(),
            signal: signal.len(),
        });
    }
    if capacity < 0.0 {
        return Err(StorageError::InvalidInput(
            "capacity must be >= 0".to_string(),
        ));
    }
    let signal_mass: f64 = signal.iter().map(|r| r.abs()).sum();
    if capacity == 0.0 || signal_mass == 0.0 {
        let silent = dispatch.iter().all(|&b| b == 0.0);
        return Ok(if silent { 1.0 } else { 0.0 });
    }
    let err: f64 = dispatch
        .iter()
        .zip(signal)
        .map(|(&b, &r)| (b - capacity * r).abs())
        .sum();
    Ok((1.0 - err / (capacity * signal_mass)).clamp(0.0, 1.0))
}

/// Throughput-proportional aging cost: `coeff * dt * sum |b|`.
pub fn aging_cost(dispatch: &[f64], cfg: &BesConfig) -> f64 {
    cfg.aging_coeff * cfg.interval_h * dispatch.iter().map(|b| b.abs()).sum::<f64>()
}

/// Clipped-tracking dispatch of `capacity * r[k]` against one signal.
/// Returns the dispatch and SOC trajectories.
pub fn tracking_dispatch(
    capacity: f64,
    signal: &[f64],
    cfg: &BesConfig,
) -> Result<(Vec<f64>, Vec<f64>), StorageError> {
    let mut e = cfg.soc_initial;
    let mut dispatch = Vec::with_capacity(signal.len());
    let mut soc = Vec::with_capacity(signal.len());
    for &r in signal {
        let target = (capacity * r).clamp(-cfg.power_rating, cfg.power_rating);
        let headroom_charge = ((cfg.soc_max - e) / (cfg.interval_h * cfg.efficiency)).max(0.0);
        let headroom_discharge = ((e - cfg.soc_min) * cfg.efficiency / cfg.interval_h).max(0.0);
        let b = target.clamp(-headroom_discharge, headroom_charge);
        e = soc_step(e, b, cfg)?;
        dispatch.push(b);
        soc.push(e);
    }
    Ok((dispatch, soc))
}

fn evaluate_capacity(
    capacity: f64,
    cfg: &BesConfig,
    markets: &[RegulationMarket],
) -> Result<(Vec<ScenarioTrace>, f64, f64, usize), StorageError> {
    let mut traces = Vec::with_capacity(markets.len());
    let mut meet = 0;
    for m in markets {
        let (dispatch, soc) = tracking_dispatch(capacity, &m.signal, cfg)?;
        let score = performance_score(capacity, &dispatch, &m.signal)?;
        let revenue = m.price * capacity * score - aging_cost(&dispatch, cfg);
        if score >= m.performance_floor {
            meet += 1;
        }
        traces.push(ScenarioTrace {
            dispatch,
            soc,
            score,
            revenue,
        });
    }
    let n = markets.len() as f64;
    let mean_score = traces.iter().map(|t| t.score).sum::<f64>() / n;
    let mean_revenue = traces.iter().map(|t| t.revenue).sum::<f64>() / n;
    Ok((traces, mean_score, mean_revenue, meet))
}

/// Chooses the participation capacity maximizing mean net revenue subject to
/// the performance floor holding on at least `ceil((1 - epsilon) * N)`
/// scenarios.
///
/// When no positive capacity satisfies the floor the plan degrades to
/// `C = 0` with `floor_attainable = false` rather than erroring.
pub fn optimize_bes_plan(
    cfg: &BesConfig,
    markets: &[RegulationMarket],
    epsilon: f64,
) -> Result<BesPlan, StorageError> {
    cfg.validate()?;
    if markets.is_empty() {
        return Err(StorageError::InvalidInput(
            "at least one market scenario".to_string(),
        ));
    }
    for m in markets {
        m.validate()?;
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(StorageError::InvalidInput(
            "epsilon must be in [0, 1)".to_string(),
        ));
    }
    let required = ((1.0 - epsilon) * markets.len() as f64).ceil().max(1.0) as usize;

    let feasible = |c: f64| -> Result<bool, StorageError> {
        Ok(evaluate_capacity(c, cfg, markets)?.3 >= required)
    };

    // feasible capacity interval [0, c_hi]; tracking degrades with C, so the
    // boundary is found by bisection when the full capacity fails the floor
    let mut c_hi = cfg.capacity_max;
    if c_hi > 0.0 && !feasible(c_hi)? {
        let mut lo = 0.0; // C = 0 scores 1.0 by convention, always feasible
        let mut hi = c_hi;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        c_hi = lo;
    }

    let floor_attainable = c_hi > 1e-9 || cfg.capacity_max == 0.0;
    let mut best_c = 0.0;
    if floor_attainable && c_hi > 0.0 {
        // coarse scan to bracket, then golden-section refinement
        let points = 40usize;
        let step = c_hi / points as f64;
        let mut best_idx = 0;
        let mut best_rev = f64::NEG_INFINITY;
        for i in 0..=points {
            let c = i as f64 * step;
            let (_, _, rev, _) = evaluate_capacity(c, cfg, markets)?;
            if rev > best_rev {
                best_rev = rev;
                best_idx = i;
            }
        }
        let mut lo = (best_idx.saturating_sub(1)) as f64 * step;
        let mut hi = ((best_idx + 1).min(points)) as f64 * step;
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c1 = hi - phi * (hi - lo);
        let mut c2 = lo + phi * (hi - lo);
        let mut f1 = evaluate_capacity(c1, cfg, markets)?.2;
        let mut f2 = evaluate_capacity(c2, cfg, markets)?.2;
        for _ in 0..120 {
            if f1 >= f2 {
                hi = c2;
                c2 = c1;
                f2 = f1;
                c1 = hi - phi * (hi - lo);
                f1 = evaluate_capacity(c1, cfg, markets)?.2;
            } else {
                lo = c1;
                c1 = c2;
                f1 = f2;
                c2 = lo + phi * (hi - lo);
                f2 = evaluate_capacity(c2, cfg, markets)?.2;
            }
        }
        best_c = 0.5 * (lo + hi);

        // SOC saturation can freeze both revenue terms, leaving a flat top;
        // among revenue ties prefer the smallest committed capacity
        let best_rev = evaluate_capacity(best_c, cfg, markets)?.2;
        let tie_eps = 1e-9 * (1.0 + best_rev.abs());
        let tied = |c: f64| -> Result<bool, StorageError> {
            Ok(evaluate_capacity(c, cfg, markets)?.2 >= best_rev - tie_eps)
        };
        if tied(0.0)? {
            best_c = 0.0;
        } else {
            let mut lo = 0.0; // not tied
            let mut hi = best_c; // tied
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if tied(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            best_c = hi;
        }
    }

    // never return a plan worse than sitting out of the market
    let candidate = evaluate_capacity(best_c, cfg, markets)?;
    let baseline = evaluate_capacity(0.0, cfg, markets)?;
    let use_candidate = candidate.2 >= baseline.2 && candidate.3 >= required;
    let (c, chosen) = if use_candidate {
        (best_c, candidate)
    } else {
        (0.0, baseline)
    };
    let (traces, score, revenue, _) = chosen;

    Ok(BesPlan {
        capacity: c,
        traces,
        score,
        revenue,
        floor_attainable,
    })
}
