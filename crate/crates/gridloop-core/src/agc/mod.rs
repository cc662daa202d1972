//! Two-area automatic generation control with dynamic watermarking.
//!
//! The plant is two equivalent governor-turbine-generator areas coupled by a
//! tie line, integrated by explicit Euler. The secondary controller runs PI
//! on the smoothed area control error (SACE) and superimposes a private
//! watermark on each power setpoint. A model-based detector checks that the
//! watermark's signature is present in the frequency and tie-flow
//! measurements and that the prediction residual variance stays nominal;
//! replayed, biased, scaled or noise-corrupted sensor data breaks one of
//! the two.

mod attack;
mod calibration;
mod detect;
mod sim;
mod watermark;

pub use attack::{apply_sensor_attack, AttackKind, AttackTarget, MeasurementHistory, SensorAttack};
pub use calibration::{
    calibration_scenario, derive_thresholds, percentile, replay_attack_scenario,
    run_no_attack_stats, FROZEN_THRESHOLDS,
};
pub use detect::{watermark_detect, DetectWindow, DetectionStatistic, DetectorThresholds};
pub use sim::{
    simulate, AgcRunResult, AgcSimConfig, AgcSimulation, AgcStepOutput, AgcStepRecord, LoadStep,
};
pub use watermark::{WatermarkKey, WatermarkStream, DEFAULT_WATERMARK_VARIANCE};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgcError {
    #[error("detection window of {got} samples is below the minimum {min}")]
    WindowTooShort { got: usize, min: usize },
    #[error("watermark variance is zero; the detection test is undefined")]
    WatermarkDisabled,
    #[error("replay attack needs {need_s:.2} s of history, only {have_s:.2} s recorded")]
    ReplayHistoryTooShort { need_s: f64, have_s: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// One equivalent governor-turbine-generator area: parameters and state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaDynamics {
    /// Inertia constant M, pu s.
    pub inertia: f64,
    /// Load damping D, pu.
    pub damping: f64,
    /// Governor droop R, pu.
    pub droop: f64,
    /// Governor time constant, s.
    pub governor_tc: f64,
    /// Turbine time constant, s.
    pub turbine_tc: f64,
    /// Frequency deviation, pu.
    pub freq_dev: f64,
    /// Mechanical power deviation, pu.
    pub mech_power: f64,
    /// Governor valve position deviation, pu.
    pub valve: f64,
}

impl Default for AreaDynamics {
    fn default() -> Self {
        Self {
            inertia: 10.0,
            damping: 1.0,
            droop: 0.05,
            governor_tc: 0.2,
            turbine_tc: 0.5,
            freq_dev: 0.0,
            mech_power: 0.0,
            valve: 0.0,
        }
    }
}

/// Frequency and tie-flow sensor readings, the AGC's inputs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Measurements {
    pub freq_dev: [f64; 2],
    pub tie_flow: f64,
}

/// The two-area system: plant state plus the PI-on-SACE controller state.
#[derive(Debug, Clone, PartialEq)]
pub struct AgcSystem {
    pub areas: [AreaDynamics; 2],
    /// Tie-line stiffness T, pu/rad.
    pub tie_stiffness: f64,
    /// Tie-line flow deviation (area 1 -> area 2), pu.
    pub tie_flow: f64,
    /// Frequency bias per area, pu (classically 1/R + D).
    pub bias: [f64; 2],
    /// SACE low-pass time constant, s.
    pub smoothing_tc: f64,
    pub kp: f64,
    pub ki: f64,
    /// Power setpoints the controller last issued (watermark included), pu.
    pub setpoint: [f64; 2],
    /// Control and integration step, s.
    pub dt: f64,
    /// Smoothed ACE per area.
    pub sace: [f64; 2],
    /// Integral of SACE per area.
    pub sace_integral: [f64; 2],
}

impl Default for AgcSystem {
    fn default() -> Self {
        Self {
            areas: [AreaDynamics::default(), AreaDynamics::default()],
            tie_stiffness: 2.0,
            tie_flow: 0.0,
            bias: [21.0, 21.0],
            smoothing_tc: 2.0,
            kp: 0.1,
            ki: 0.05,
            setpoint: [0.0, 0.0],
            dt: 0.02,
            sace: [0.0, 0.0],
            sace_integral: [0.0, 0.0],
        }
    }
}

impl AgcSystem {
    pub fn validate(&self) -> Result<(), AgcError> {
        let fail = |m: &str| Err(AgcError::InvalidInput(m.to_string()));
        if self.dt <= 0.0 || self.dt > 0.1 {
            return fail("dt must be in (0, 0.1] s");
        }
        for a in &self.areas {
            if a.inertia <= 0.0 || a.droop <= 0.0 {
                return fail("inertia and droop must be > 0");
            }
            if a.governor_tc <= 0.0 || a.turbine_tc <= 0.0 {
                return fail("time constants must be > 0");
            }
        }
        if self.bias.iter().any(|&b| b <= 0.0) {
            return fail("bias must be > 0");
        }
        if self.smoothing_tc <= 0.0 {
            return fail("smoothing_tc must be > 0");
        }
        Ok(())
    }

    /// Sensor view of the current plant state.
    pub fn measurements(&self) -> Measurements {
        Measurements {
            freq_dev: [self.areas[0].freq_dev, self.areas[1].freq_dev],
            tie_flow: self.tie_flow,
        }
    }

    /// Overwrites the measured states; the detector's observer uses this to
    /// re-anchor on sensor data while its valve/mech estimates free-run.
    pub fn set_measured(&mut self, meas: Measurements) {
        self.areas[0].freq_dev = meas.freq_dev[0];
        self.areas[1].freq_dev = meas.freq_dev[1];
        self.tie_flow = meas.tie_flow;
    }

    /// One explicit-Euler step of swing, governor, turbine and tie-line
    /// equations under the given per-area load deviations.
    pub fn step_dynamics(&mut self, load_change: [f64; 2], dt: f64) {
        debug_assert!(dt > 0.0);
        let [a1, a2] = self.areas;
        let tie = self.tie_flow;

        let d_freq1 =
            (a1.mech_power - load_change[0] - a1.damping * a1.freq_dev - tie) / a1.inertia;
        let d_freq2 =
            (a2.mech_power - load_change[1] - a2.damping * a2.freq_dev + tie) / a2.inertia;
        let d_tie = self.tie_stiffness * (a1.freq_dev - a2.freq_dev);
        let d_valve1 = (self.setpoint[0] - a1.freq_dev / a1.droop - a1.valve) / a1.governor_tc;
        let d_valve2 = (self.setpoint[1] - a2.freq_dev / a2.droop - a2.valve) / a2.governor_tc;
        let d_mech1 = (a1.valve - a1.mech_power) / a1.turbine_tc;
        let d_mech2 = (a2.valve - a2.mech_power) / a2.turbine_tc;

        self.areas[0].freq_dev += dt * d_freq1;
        self.areas[1].freq_dev += dt * d_freq2;
        self.tie_flow += dt * d_tie;
        self.areas[0].valve += dt * d_valve1;
        self.areas[1].valve += dt * d_valve2;
        self.areas[0].mech_power += dt * d_mech1;
        self.areas[1].mech_power += dt * d_mech2;
    }

    /// Area control errors from (possibly corrupted) measurements:
    /// `ACE_1 = +P_tie + B_1 w_1`, `ACE_2 = -P_tie + B_2 w_2`.
    pub fn ace(&self, meas: Measurements) -> [f64; 2] {
        [
            meas.tie_flow + self.bias[0] * meas.freq_dev[0],
            -meas.tie_flow + self.bias[1] * meas.freq_dev[1],
        ]
    }

    /// One secondary-control step: low-pass the ACE into SACE, integrate,
    /// and issue `P_set = -(kp SACE + ki int SACE) + watermark`. Returns the
    /// raw ACE for tracing.
    pub fn control_step(&mut self, meas: Measurements, watermark: [f64; 2]) -> [f64; 2] {
        let ace = self.ace(meas);
        for i in 0..2 {
            self.sace[i] += self.dt * (ace[i] - self.sace[i]) / self.smoothing_tc;
            self.sace_integral[i] += self.dt * self.sace[i];
            self.setpoint[i] =
                -(self.kp * self.sace[i] + self.ki * self.sace_integral[i]) + watermark[i];
        }
        ace
    }

    /// Aggregate primary-response stiffness `sum_i (1/R_i + D_i)`, the
    /// denominator of the droop steady-state frequency deviation.
    pub fn primary_stiffness(&self) -> f64 {
        self.areas.iter().map(|a| 1.0 / a.droop + a.damping).sum()
    }
}
