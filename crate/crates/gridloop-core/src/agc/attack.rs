//! Sensor attacks on the AGC measurement path.
//!
//! Attacks corrupt what the controller and detector see; the physical plant
//! and the actuation path stay untouched. Replay substitutes sensor data
//! recorded a fixed delay earlier, which removes both the live watermark
//! signature and any live disturbance response from the readings.

use super::{AgcError, Measurements};
use crate::rng::CounterRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    None,
    Bias,
    Scale,
    Replay,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackTarget {
    Freq,
    TieFlow,
    Both,
}

/// A timed sensor attack. `magnitude` is the bias in pu, the scale factor,
/// the replay delay in seconds, or the noise variance in pu^2 depending on
/// `kind`. Active on `[start_s, end_s)`.
#[derive(Debug, Clone, Copy)]
pub struct SensorAttack {
    pub kind: AttackKind,
    pub magnitude: f64,
    pub target: AttackTarget,
    pub start_s: f64,
    pub end_s: f64,
}

impl SensorAttack {
    pub fn validate(&self) -> Result<(), AgcError> {
        if self.start_s >= self.end_s {
            return Err(AgcError::InvalidInput(
                "attack start_s must precede end_s".to_string(),
            ));
        }
        if self.kind == AttackKind::Replay && self.magnitude <= 0.0 {
            return Err(AgcError::InvalidInput(
                "replay delay must be > 0 s".to_string(),
            ));
        }
        if self.kind == AttackKind::Noise && self.magnitude < 0.0 {
            return Err(AgcError::InvalidInput(
                "noise variance must be >= 0".to_string(),
            ));
        }
        Ok(())
    }

    pub fn active_at(&self, t_s: f64) -> bool {
        t_s >= self.start_s && t_s < self.end_s
    }
}

/// Rolling record of sensor readings at the control cadence, the replay
/// attacker's source material.
#[derive(Debug, Clone, Default)]
pub struct MeasurementHistory {
    pub dt: f64,
    samples: Vec<Measurements>,
}

impl MeasurementHistory {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, m: Measurements) {
        self.samples.push(m);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample at absolute time `t_s`, rounded to the recording grid.
    pub fn at_time(&self, t_s: f64) -> Option<Measurements> {
        if t_s < 0.0 {
            return None;
        }
        let idx = (t_s / self.dt).round() as usize;
        self.samples.get(idx).copied()
    }

    pub fn span_s(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }
}

fn corrupt(meas: &mut Measurements, target: AttackTarget, f: impl Fn(f64, usize) -> f64) {
    // channel ids: 0, 1 frequency areas, 2 tie flow
    if matches!(target, AttackTarget::Freq | AttackTarget::Both) {
        meas.freq_dev[0] = f(meas.freq_dev[0], 0);
        meas.freq_dev[1] = f(meas.freq_dev[1], 1);
    }
    if matches!(target, AttackTarget::TieFlow | AttackTarget::Both) {
        meas.tie_flow = f(meas.tie_flow, 2);
    }
}

/// Applies `attack` to the reading taken at time `t_s`. `history` holds the
/// past readings for replay; `noise` supplies the attacker's noise stream
/// and the current step index.
pub fn apply_sensor_attack(
    measurements: Measurements,
    attack: &SensorAttack,
    t_s: f64,
    history: &MeasurementHistory,
    noise: Option<(&CounterRng, u64)>,
) -> Result<Measurements, AgcError> {
    attack.validate()?;
    if !attack.active_at(t_s) || attack.kind == AttackKind::None {
        return Ok(measurements);
    }
    let mut out = measurements;
    match attack.kind {
        AttackKind::None => {}
        AttackKind::Bias => corrupt(&mut out, attack.target, |v, _| v + attack.magnitude),
        AttackKind::Scale => corrupt(&mut out, attack.target, |v, _| v * attack.magnitude),
        AttackKind::Replay => {
            let source_t = t_s - attack.magnitude;
            let Some(old) = history.at_time(source_t) else {
                return Err(AgcError::ReplayHistoryTooShort {
                    need_s: attack.magnitude,
                    have_s: history.span_s(),
                });
            };
            corrupt(&mut out, attack.target, |_, ch| match ch {
                0 => old.freq_dev[0],
                1 => old.freq_dev[1],
                _ => old.tie_flow,
            });
        }
        AttackKind::Noise => {
            let Some((rng, step)) = noise else {
                return Err(AgcError::InvalidInput(
                    "noise attack needs an attacker noise stream".to_string(),
                ));
            };
            let sigma = attack.magnitude.sqrt();
            corrupt(&mut out, attack.target, |v, ch| {
                v + sigma * rng.standard_normal(step.wrapping_mul(3).wrapping_add(ch as u64))
            });
        }
    }
    Ok(out)
}
