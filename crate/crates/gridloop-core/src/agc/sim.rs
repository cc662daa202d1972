//! Closed-loop AGC simulation: plant, controller, watermark injection,
//! sensor attacks, and rolling watermark detection.
//!
//! The detector's observer replica is driven by the issued commands and the
//! scheduled load, with its measured channels re-anchored to the sensor
//! readings each step; snapshots of it provide the anchors for the
//! windowed two-replica test.
//!
//! [`AgcSimulation`] advances one control step at a time so the multi-rate
//! harness can own the clock; [`simulate`] drives a whole horizon.

use super::attack::{apply_sensor_attack, MeasurementHistory, SensorAttack};
use super::detect::{watermark_detect, DetectWindow, DetectionStatistic, DetectorThresholds};
use super::watermark::{WatermarkKey, WatermarkStream};
use super::{AgcError, AgcSystem, Measurements};
use crate::rng::CounterRng;

/// A scheduled load step, known to both the plant and the detector.
#[derive(Debug, Clone, Copy)]
pub struct LoadStep {
    pub t_s: f64,
    pub area: usize,
    pub delta_pu: f64,
}

#[derive(Debug, Clone)]
pub struct AgcSimConfig {
    pub system: AgcSystem,
    pub watermark: WatermarkKey,
    pub attacks: Vec<SensorAttack>,
    /// Scheduled (forecast) load steps; the detector models these.
    pub load_steps: Vec<LoadStep>,
    /// Std-dev of the unscheduled white load noise per step, pu.
    pub noise_sigma: f64,
    /// Seed for the load-noise and attacker-noise streams.
    pub noise_seed: u64,
    pub horizon_s: f64,
    /// Detection window, samples.
    pub detector_window: usize,
    /// Steps between detector evaluations.
    pub detector_period: usize,
    pub thresholds: DetectorThresholds,
    /// Keep the full per-step trace (memory-heavy for Monte-Carlo sweeps).
    pub record_trace: bool,
}

impl AgcSimConfig {
    /// Quiet closed loop with defaults and detection enabled.
    pub fn new(horizon_s: f64, watermark_seed: u64, thresholds: DetectorThresholds) -> Self {
        Self {
            system: AgcSystem::default(),
            watermark: WatermarkKey::new(watermark_seed, super::DEFAULT_WATERMARK_VARIANCE),
            attacks: Vec::new(),
            load_steps: Vec::new(),
            noise_sigma: 0.0,
            noise_seed: watermark_seed,
            horizon_s,
            detector_window: 500,
            detector_period: 50,
            thresholds,
            record_trace: false,
        }
    }
}

/// One step of the recorded trace.
#[derive(Debug, Clone, Copy)]
pub struct AgcStepRecord {
    pub t_s: f64,
    /// True plant state (what the grid actually does).
    pub freq_dev: [f64; 2],
    pub tie_flow: f64,
    /// What the controller saw (after any attack).
    pub measured: Measurements,
    pub ace: [f64; 2],
    pub sace: [f64; 2],
    pub setpoint: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct AgcRunResult {
    pub trace: Vec<AgcStepRecord>,
    /// Detector evaluations as (time, statistic).
    pub detections: Vec<(f64, DetectionStatistic)>,
    pub final_system: AgcSystem,
}

impl AgcRunResult {
    /// Detection outcome of the last evaluated window.
    pub fn final_detection(&self) -> Option<&DetectionStatistic> {
        self.detections.last().map(|(_, d)| d)
    }

    pub fn any_alarm_in(&self, from_s: f64, to_s: f64) -> bool {
        self.detections
            .iter()
            .any(|(t, d)| *t >= from_s && *t < to_s && d.alarm)
    }
}

/// Incremental closed-loop stepper.
pub struct AgcSimulation {
    cfg: AgcSimConfig,
    stream: WatermarkStream,
    noise_rng: CounterRng,
    attack_rng: CounterRng,
    sys: AgcSystem,
    observer: AgcSystem,
    history: MeasurementHistory,
    setpoints: Vec<[f64; 2]>,
    watermarks: Vec<[f64; 2]>,
    scheds: Vec<[f64; 2]>,
    readings: Vec<Measurements>,
    snapshots: Vec<AgcSystem>,
    k: usize,
}

/// What one control step produced.
#[derive(Debug, Clone, Copy)]
pub struct AgcStepOutput {
    pub record: AgcStepRecord,
    pub detection: Option<DetectionStatistic>,
}

impl AgcSimulation {
    pub fn new(cfg: AgcSimConfig) -> Result<Self, AgcError> {
        cfg.system.validate()?;
        for attack in &cfg.attacks {
            attack.validate()?;
        }
        let dt = cfg.system.dt;
        Ok(Self {
            stream: WatermarkStream::new(&cfg.watermark),
            noise_rng: CounterRng::for_module(cfg.noise_seed, "agc.load_noise"),
            attack_rng: CounterRng::for_module(cfg.noise_seed, "agc.attack"),
            sys: cfg.system.clone(),
            observer: cfg.system.clone(),
            history: MeasurementHistory::new(dt),
            setpoints: Vec::new(),
            watermarks: Vec::new(),
            scheds: Vec::new(),
            readings: Vec::new(),
            snapshots: Vec::new(),
            k: 0,
            cfg,
        })
    }

    pub fn system(&self) -> &AgcSystem {
        &self.sys
    }

    pub fn time_s(&self) -> f64 {
        self.k as f64 * self.sys.dt
    }

    fn scheduled_load_at(&self, t: f64) -> [f64; 2] {
        let mut sched = [0.0; 2];
        for step in &self.cfg.load_steps {
            if step.t_s <= t {
                sched[step.area] += step.delta_pu;
            }
        }
        sched
    }

    /// One control-plus-plant step: read sensors, apply the attack, run the
    /// detector if a window is due, issue the setpoint, advance the plant.
    pub fn step(&mut self) -> Result<AgcStepOutput, AgcError> {
        let dt = self.sys.dt;
        let k = self.k;
        let t = k as f64 * dt;
        let sched = self.scheduled_load_at(t);

        let y_true = self.sys.measurements();
        self.history.push(y_true);
        let mut y_meas = y_true;
        for attack in &self.cfg.attacks {
            y_meas = apply_sensor_attack(
                y_meas,
                attack,
                t,
                &self.history,
                Some((&self.attack_rng, k as u64)),
            )?;
        }
        self.readings.push(y_meas);

        let w = self.cfg.detector_window;
        let mut detection = None;
        if self.cfg.watermark.enabled() && k >= w && k.is_multiple_of(self.cfg.detector_period) {
            let win = DetectWindow {
                anchor: self.snapshots[k - w].clone(),
                setpoints: &self.setpoints[k - w..k],
                watermarks: &self.watermarks[k - w..k],
                scheduled_load: &self.scheds[k - w..k],
                measured: &self.readings[k - w + 1..=k],
            };
            detection = Some(watermark_detect(
                &win,
                self.cfg.watermark.variance,
                &self.cfg.thresholds,
            )?);
        }

        // observer re-anchors its measured channels on the sensor data
        self.observer.set_measured(y_meas);
        self.snapshots.push(self.observer.clone());

        let wm = self.stream.sample(k as u64);
        let ace = self.sys.control_step(y_meas, wm);
        self.setpoints.push(self.sys.setpoint);
        self.watermarks.push(wm);
        self.scheds.push(sched);

        let record = AgcStepRecord {
            t_s: t,
            freq_dev: y_true.freq_dev,
            tie_flow: y_true.tie_flow,
            measured: y_meas,
            ace,
            sace: self.sys.sace,
            setpoint: self.sys.setpoint,
        };

        self.observer.setpoint = self.sys.setpoint;
        self.observer.step_dynamics(sched, dt);

        let load = [
            sched[0] + self.cfg.noise_sigma * self.noise_rng.standard_normal(2 * k as u64),
            sched[1] + self.cfg.noise_sigma * self.noise_rng.standard_normal(2 * k as u64 + 1),
        ];
        self.sys.step_dynamics(load, dt);
        self.k += 1;

        Ok(AgcStepOutput { record, detection })
    }
}

/// Runs the whole configured horizon. Deterministic: the same config
/// produces a bit-identical result.
pub fn simulate(cfg: &AgcSimConfig) -> Result<AgcRunResult, AgcError> {
    let n_steps = (cfg.horizon_s / cfg.system.dt).round() as usize;
    let record_trace = cfg.record_trace;
    let mut sim = AgcSimulation::new(cfg.clone())?;
    let mut trace = Vec::new();
    let mut detections = Vec::new();
    for _ in 0..n_steps {
        let out = sim.step()?;
        if record_trace {
            trace.push(out.record);
        }
        if let Some(d) = out.detection {
            detections.push((out.record.t_s, d));
        }
    }
    Ok(AgcRunResult {
        trace,
        detections,
        final_system: sim.sys,
    })
}
