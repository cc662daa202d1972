//! Scenario configuration: a tree of key-value sections.
//!
//! The file format is TOML with the sections `[scenario]`, `[network]`,
//! `[loops.<family>]`, `[disturbances]`, `[attacks]` and `[seeds]`.
//! Parsing is strict (unknown keys are errors); semantic validation happens
//! when the runner builds the loops and reports every problem at once.

use serde::Deserialize;
use std::path::Path;

use super::HarnessError;

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, HarnessError> {
    toml::from_str(text).map_err(|e| HarnessError::Config(vec![e.to_string()]))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    /// Transmission network for the market loops.
    pub network: Option<NetworkSection>,
    /// Radial distribution feeder for the placement loop; falls back to
    /// `[network]` when that section is already radial.
    pub feeder: Option<NetworkSection>,
    #[serde(default)]
    pub loops: LoopsSection,
    #[serde(default)]
    pub disturbances: DisturbancesSection,
    #[serde(default)]
    pub attacks: AttacksSection,
    #[serde(default)]
    pub seeds: SeedsSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default = "default_name")]
    pub name: String,
    pub horizon_s: f64,
}

fn default_name() -> String {
    "scenario".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub topology: String,
    #[serde(default = "default_s_base")]
    pub s_base_mva: f64,
    #[serde(default = "default_kva_base")]
    pub kva_base: f64,
    #[serde(default)]
    pub bus: Vec<BusCfg>,
    #[serde(default)]
    pub line: Vec<LineCfg>,
}

fn default_s_base() -> f64 {
    100.0
}

fn default_kva_base() -> f64 {
    1000.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusCfg {
    pub id: usize,
    pub kind: String,
    #[serde(default = "default_one")]
    pub voltage_sq: f64,
    #[serde(default)]
    pub angle: f64,
    #[serde(default)]
    pub p_inject: f64,
    #[serde(default)]
    pub q_inject: f64,
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineCfg {
    pub from: usize,
    pub to: usize,
    #[serde(default)]
    pub susceptance: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub x: f64,
    pub flow_limit: Option<f64>,
    pub current_limit: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopsSection {
    pub agc: Option<AgcCfg>,
    pub dispatch: Option<DispatchCfg>,
    pub bes: Option<BesCfg>,
    pub ev: Option<EvCfg>,
    pub evcs: Option<EvcsCfg>,
    pub demand: Option<DemandCfg>,
    pub microgrid: Option<MicrogridCfg>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgcCfg {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "d_inertia")]
    pub inertia: f64,
    #[serde(default = "d_damping")]
    pub damping: f64,
    #[serde(default = "d_droop")]
    pub droop: f64,
    #[serde(default = "d_governor_tc")]
    pub governor_tc: f64,
    #[serde(default = "d_turbine_tc")]
    pub turbine_tc: f64,
    #[serde(default = "d_tie")]
    pub tie_stiffness: f64,
    #[serde(default = "d_bias")]
    pub bias: f64,
    #[serde(default = "d_smoothing")]
    pub smoothing_tc: f64,
    #[serde(default = "d_kp")]
    pub kp: f64,
    #[serde(default = "d_ki")]
    pub ki: f64,
    #[serde(default = "d_dt")]
    pub dt_s: f64,
    #[serde(default = "d_wm_var")]
    pub watermark_variance: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "d_window")]
    pub detector_window: usize,
    #[serde(default = "d_det_period")]
    pub detector_period: usize,
    /// Emit trace rows every n-th control step.
    #[serde(default = "d_trace_every")]
    pub trace_every: usize,
}

fn d_inertia() -> f64 {
    10.0
}
fn d_damping() -> f64 {
    1.0
}
fn d_droop() -> f64 {
    0.05
}
fn d_governor_tc() -> f64 {
    0.2
}
fn d_turbine_tc() -> f64 {
    0.5
}
fn d_tie() -> f64 {
    2.0
}
fn d_bias() -> f64 {
    21.0
}
fn d_smoothing() -> f64 {
    2.0
}
fn d_kp() -> f64 {
    0.1
}
fn d_ki() -> f64 {
    0.05
}
fn d_dt() -> f64 {
    0.02
}
fn d_wm_var() -> f64 {
    crate::agc::DEFAULT_WATERMARK_VARIANCE
}
fn d_window() -> usize {
    500
}
fn d_det_period() -> usize {
    50
}
fn d_trace_every() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispatchCfg {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "d_ed_period")]
    pub period_s: f64,
    /// Static per-bus demand, MW.
    pub demand_mw: Option<Vec<f64>>,
    /// Per-hour per-bus demand, MW; enables unit commitment.
    pub hourly_demand_mw: Option<Vec<Vec<f64>>>,
    /// Per-scenario per-bus demand, MW; enables scenario dispatch.
    pub scenarios_mw: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "d_voll")]
    pub voll: f64,
    #[serde(default)]
    pub generator: Vec<GeneratorCfg>,
}

fn d_ed_period() -> f64 {
    crate::dispatch::ED_PERIOD_S
}
fn d_voll() -> f64 {
    crate::dispatch::DEFAULT_VOLL
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorCfg {
    pub id: usize,
    pub bus: usize,
    /// Single marginal price; alternative to `segments`.
    pub price: Option<f64>,
    pub segments: Option<Vec<SegmentCfg>>,
    #[serde(default)]
    pub p_min: f64,
    pub p_max: f64,
    #[serde(default)]
    pub startup_cost: f64,
    #[serde(default = "default_true")]
    pub committed: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentCfg {
    pub mw: f64,
    pub price: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesCfg {
    #[serde(default = "default_true")]
    pub enabled: bool,
    pub capacity_max: f64,
    pub power_rating: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_initial: f64,
    #[serde(default = "d_efficiency")]
    pub efficiency: f64,
    #[serde(default = "default_one")]
    pub interval_h: f64,
    #[serde(default)]
    pub aging_coeff: f64,
    pub price: f64,
    #[serde(default)]
    pub performance_floor: f64,
    #[serde(default)]
    pub epsilon: f64,
    /// One signal trajectory, or several scenarios.
    pub signal: Option<Vec<f64>>,
    pub scenarios: Option<Vec<Vec<f64>>>,
}

fn d_efficiency() -> f64 {
    0.9
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvCfg {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_one")]
    pub dk_h: f64,
    pub base_load_kw: Vec<f64>,
    /// Aggregator price scaling; defaults to 1 / (2 (N + 1)).
    pub gamma: Option<f64>,
    #[serde(default = "d_max_iters")]
    pub max_iters: usize,
    #[serde(default = "d_ev_mode")]
    pub mode: String,
    #[serde(default)]
    pub session: Vec<EvSessionCfg>,
}

fn d_max_iters() -> usize {
    20_000
}
fn d_ev_mode() -> String {
    "decentralized".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvSessionCfg {
    pub id: usize,
    pub k_start: usize,
    pub k_end: usize,
    pub rate_max: f64,
    #[serde(default = "default_one")]
    pub efficiency: f64,
    pub battery_capacity: f64,
    pub soc_start: f64,
    pub soc_end: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvcsCfg {
    #[serde(default = "default_true")]
    pub enabled: bool,
    pub candidates: Vec<usize>,
    pub fixed_cost: Vec<f64>,
    pub per_spot_cost: f64,
    pub spot_power_kw: f64,
    pub demand_floor_kw: f64,
    pub budget: f64,
    #[serde(default = "d_v_min")]
    pub v_min: f64,
    #[serde(default = "d_v_max")]
    pub v_max: f64,
    #[serde(default = "d_y_max")]
    pub y_max: u32,
    pub base_load_p: Option<Vec<f64>>,
    pub base_load_q: Option<Vec<f64>>,
}

fn d_v_min() -> f64 {
    0.95
}
fn d_v_max() -> f64 {
    1.05
}
fn d_y_max() -> u32 {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandCfg {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_one")]
    pub slot_h: f64,
    #[serde(default = "d_dt_h")]
    pub dt_h: f64,
    pub energy_budget_kwh: f64,
    pub price: Vec<f64>,
    pub ambient: Vec<f64>,
    #[serde(default = "d_track_kp")]
    pub kp: f64,
    #[serde(default = "d_track_ki")]
    pub ki: f64,
    #[serde(default)]
    pub house: Vec<HouseCfg>,
    pub fleet: Option<FleetTemplateCfg>,
}

fn d_dt_h() -> f64 {
    0.05
}
fn d_track_kp() -> f64 {
    crate::demand::DEFAULT_TRACKING_KP
}
fn d_track_ki() -> f64 {
    crate::demand::DEFAULT_TRACKING_KI
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HouseCfg {
    pub id: usize,
    pub alpha: f64,
    pub beta: f64,
    pub comfort_low: f64,
    pub comfort_high: f64,
    pub temp: f64,
    #[serde(default = "d_deadband")]
    pub deadband: f64,
    pub ac_power: f64,
    #[serde(default = "default_one")]
    pub efficiency: f64,
}

fn d_deadband() -> f64 {
    0.5
}

/// Generates `count` houses around a template with seeded multiplicative
/// jitter, for fleet-scale scenarios without hand-writing every house.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetTemplateCfg {
    pub count: usize,
    pub alpha: f64,
    pub beta: f64,
    pub comfort_low: f64,
    pub comfort_high: f64,
    pub ac_power: f64,
    #[serde(default = "default_one")]
    pub efficiency: f64,
    #[serde(default = "d_deadband")]
    pub deadband: f64,
    /// Relative jitter applied to alpha, beta and the initial temperature.
    #[serde(default = "d_jitter")]
    pub jitter: f64,
}

fn d_jitter() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicrogridCfg {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "d_mg_period")]
    pub period_s: f64,
    #[serde(default = "d_mg_mode")]
    pub mode: String,
    pub load_p: f64,
    #[serde(default)]
    pub load_q: f64,
    /// Tertiary PCC export target while grid-connected, pu.
    pub pcc_target: Option<f64>,
    /// Run secondary restoration while islanded.
    #[serde(default)]
    pub restore: bool,
    #[serde(default)]
    pub critical_target: Vec<CriticalTargetCfg>,
    pub inverter: Vec<InverterCfg>,
}

fn d_mg_period() -> f64 {
    60.0
}
fn d_mg_mode() -> String {
    "islanded".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalTargetCfg {
    pub inverter: usize,
    pub v_target: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverterCfg {
    pub id: usize,
    pub droop_mp: f64,
    pub droop_mq: f64,
    pub p_max: f64,
    #[serde(default = "d_nominal_freq")]
    pub nominal_freq: f64,
    #[serde(default = "default_one")]
    pub nominal_volt: f64,
    #[serde(default)]
    pub p_setpoint: f64,
    #[serde(default)]
    pub q_setpoint: f64,
    #[serde(default = "d_volt_offset_max")]
    pub volt_offset_max: f64,
}

fn d_nominal_freq() -> f64 {
    60.0
}
fn d_volt_offset_max() -> f64 {
    0.1
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbancesSection {
    #[serde(default)]
    pub load_step: Vec<LoadStepCfg>,
    #[serde(default)]
    pub islanding: Vec<IslandingCfg>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadStepCfg {
    pub t_s: f64,
    pub area: usize,
    pub delta_pu: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IslandingCfg {
    pub t_s: f64,
    pub mode: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttacksSection {
    #[serde(default)]
    pub sensor: Vec<SensorAttackCfg>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorAttackCfg {
    pub kind: String,
    #[serde(default)]
    pub magnitude: f64,
    #[serde(default = "d_target")]
    pub target: String,
    pub start_s: f64,
    pub end_s: f64,
}

fn d_target() -> String {
    "both".to_string()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsSection {
    #[serde(default)]
    pub scenario: u64,
    pub agc: Option<u64>,
    pub bes: Option<u64>,
    pub ev: Option<u64>,
    pub demand: Option<u64>,
}

impl SeedsSection {
    pub fn for_module(&self, module: &str) -> u64 {
        match module {
            "agc" => self.agc.unwrap_or(self.scenario),
            "bes" => self.bes.unwrap_or(self.scenario),
            "ev" => self.ev.unwrap_or(self.scenario),
            "demand" => self.demand.unwrap_or(self.scenario),
            _ => self.scenario,
        }
    }

    pub fn override_all(&mut self, seed: u64) {
        self.scenario = seed;
        self.agc = None;
        self.bes = None;
        self.ev = None;
        self.demand = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_scenario() {
        let cfg = parse_scenario(
            r#"
            [scenario]
            horizon_s = 10.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.scenario.horizon_s, 10.0);
        assert_eq!(cfg.scenario.name, "scenario");
        assert!(cfg.loops.agc.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_scenario(
            r#"
            [scenario]
            horizon_s = 10.0
            not_a_key = 1
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)));
    }

    #[test]
    fn parses_network_and_loops() {
        let cfg = parse_scenario(
            r#"
            [scenario]
            horizon_s = 120.0

            [network]
            topology = "meshed_transmission"
            [[network.bus]]
            id = 0
            kind = "slack"
            [[network.bus]]
            id = 1
            kind = "pq"
            [[network.line]]
            from = 0
            to = 1
            susceptance = 10.0

            [loops.agc]
            noise_sigma = 0.001

            [loops.dispatch]
            demand_mw = [0.0, 60.0]
            [[loops.dispatch.generator]]
            id = 0
            bus = 0
            price = 10.0
            p_max = 50.0

            [disturbances]
            [[disturbances.load_step]]
            t_s = 60.0
            area = 0
            delta_pu = 0.1

            [seeds]
            scenario = 7
            "#,
        )
        .unwrap();
        assert!(cfg.loops.agc.as_ref().unwrap().enabled);
        assert_eq!(cfg.loops.dispatch.as_ref().unwrap().generator.len(), 1);
        assert_eq!(cfg.seeds.for_module("agc"), 7);
        assert_eq!(cfg.disturbances.load_step.len(), 1);
    }

    #[test]
    fn seed_override_clears_module_seeds() {
        let mut seeds = SeedsSection {
            scenario: 1,
            agc: Some(5),
            bes: None,
            ev: None,
            demand: None,
        };
        seeds.override_all(9);
        assert_eq!(seeds.for_module("agc"), 9);
        assert_eq!(seeds.for_module("bes"), 9);
    }
}
