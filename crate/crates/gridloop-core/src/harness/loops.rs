//! Adapters wiring the domain modules into the harness.
//!
//! Each adapter owns its loop's state, translates scenario configuration
//! into domain inputs (reporting every problem at once), emits trace
//! signals on activation, and renders its family CSV when the run ends.

use super::config::ScenarioConfig;
use super::runner::{ControlLoop, LoopSink, SignalBus};
use super::schedule::LoopSpec;
use super::trace::OutputFile;
use super::HarnessError;
use crate::agc::{
    AgcSimConfig, AgcSimulation, AgcSystem, AttackKind, AttackTarget, LoadStep, SensorAttack,
    WatermarkKey, FROZEN_THRESHOLDS,
};
use crate::demand::{
    lp_relaxed_schedule, tracking_step, FleetPlan, ThermalHouse, TrackingController,
};
use crate::dispatch::{
    economic_dispatch, scenario_dispatch, unit_commitment, CommitmentSchedule, CostSegment,
    DemandSpec, DispatchResult, Generator,
};
use crate::ev::{
    centralized_schedule, decentralized_schedule, evcs_place, ChargingProfile, EvSession,
    Placement, PlacementProblem,
};
use crate::microgrid::{
    droop_steady_state, grid_connected_steady_state, secondary_restore, tertiary_setpoint,
    DroopInverter, GridMode, MicrogridState, SteadyState, VoltageTarget,
};
use crate::model::{Bus, BusKind, Line, Network, PqLoad, Topology};
use crate::rng::CounterRng;
use crate::storage::{optimize_bes_plan, BesConfig, BesPlan, RegulationMarket};
use crate::trace_fmt::{csv_line, sig12};

/// Builds every enabled loop, collecting all configuration problems.
pub(super) fn build_loops(cfg: &ScenarioConfig) -> Result<Vec<Box<dyn ControlLoop>>, HarnessError> {
    let mut loops: Vec<Box<dyn ControlLoop>> = Vec::new();
    let mut issues: Vec<String> = Vec::new();

    let network = match build_network_section(cfg.network.as_ref()) {
        Ok(net) => net,
        Err(mut errs) => {
            issues.append(&mut errs);
            None
        }
    };
    let feeder = match build_network_section(cfg.feeder.as_ref()) {
        Ok(net) => net,
        Err(errs) => {
            issues.extend(errs.into_iter().map(|e| format!("feeder: {e}")));
            None
        }
    };

    if let Some(c) = &cfg.loops.agc {
        if c.enabled {
            match AgcLoop::build(cfg) {
                Ok(l) => loops.push(Box::new(l)),
                Err(mut e) => issues.append(&mut e),
            }
        }
    }
    if let Some(c) = &cfg.loops.dispatch {
        if c.enabled {
            match DispatchLoop::build(cfg, network.as_ref()) {
                Ok(l) => loops.push(Box::new(l)),
                Err(mut e) => issues.append(&mut e),
            }
        }
    }
    if let Some(c) = &cfg.loops.bes {
        if c.enabled {
            match BesLoop::build(cfg) {
                Ok(l) => loops.push(Box::new(l)),
                Err(mut e) => issues.append(&mut e),
            }
        }
    }
    if let Some(c) = &cfg.loops.ev {
        if c.enabled {
            match EvLoop::build(cfg) {
                Ok(l) => loops.push(Box::new(l)),
                Err(mut e) => issues.append(&mut e),
            }
        }
    }
    if let Some(c) = &cfg.loops.evcs {
        if c.enabled {
            let radial = feeder.as_ref().or_else(|| {
                network
                    .as_ref()
                    .filter(|n| n.topology == Topology::RadialDistribution)
            });
            match EvcsLoop::build(cfg, radial) {
                Ok(l) => loops.push(Box::new(l)),
                Err(mut e) => issues.append(&mut e),
            }
        }
    }
    if let Some(c) = &cfg.loops.demand {
        if c.enabled {
            match DemandLoop::build(cfg) {
                Ok(l) => loops.push(Box::new(l)),
                Err(mut e) => issues.append(&mut e),
            }
        }
    }
    if let Some(c) = &cfg.loops.microgrid {
        if c.enabled {
            match MicrogridLoop::build(cfg) {
                Ok(l) => loops.push(Box::new(l)),
                Err(mut e) => issues.append(&mut e),
            }
        }
    }

    if issues.is_empty() {
        Ok(loops)
    } else {
        Err(HarnessError::Config(issues))
    }
}

/// Converts a network section into a validated [`Network`].
pub(super) fn build_network_section(
    section: Option<&super::config::NetworkSection>,
) -> Result<Option<Network>, Vec<String>> {
    let Some(section) = section else {
        return Ok(None);
    };
    let mut issues = Vec::new();
    let topology = match section.topology.as_str() {
        "meshed_transmission" => Topology::MeshedTransmission,
        "radial_distribution" => Topology::RadialDistribution,
        other => {
            issues.push(format!(
                "network.topology: unknown value {other:?} (meshed_transmission or radial_distribution)"
            ));
            Topology::MeshedTransmission
        }
    };
    let mut buses = Vec::new();
    for b in &section.bus {
        let kind = match b.kind.as_str() {
            "slack" => BusKind::Slack,
            "pq" => BusKind::Pq,
            "pv" => BusKind::Pv,
            other => {
                issues.push(format!("network.bus {}: unknown kind {other:?}", b.id));
                BusKind::Pq
            }
        };
        buses.push(Bus {
            id: b.id,
            kind,
            voltage_sq: b.voltage_sq,
            angle: b.angle,
            p_inject: b.p_inject,
            q_inject: b.q_inject,
        });
    }
    let lines = section
        .line
        .iter()
        .map(|l| Line {
            from: l.from,
            to: l.to,
            susceptance: l.susceptance,
            r: l.r,
            x: l.x,
            flow_limit: l.flow_limit.unwrap_or(f64::INFINITY),
            current_limit: l.current_limit.unwrap_or(f64::INFINITY),
        })
        .collect();
    match Network::new(buses, lines, topology) {
        Ok(net) if issues.is_empty() => Ok(Some(net)),
        Ok(_) => Err(issues),
        Err(e) => {
            issues.push(format!("network: {e}"));
            Err(issues)
        }
    }
}

fn digest_numbers(parts: &[f64]) -> String {
    parts
        .iter()
        .map(|v| sig12(*v))
        .collect::<Vec<_>>()
        .join(",")
}

// ---------------------------------------------------------------------------
// AGC

struct AgcLoop {
    sim: AgcSimulation,
    trace_every: usize,
    steps: usize,
    dt_s: f64,
}

impl AgcLoop {
    fn build(cfg: &ScenarioConfig) -> Result<Self, Vec<String>> {
        let c = cfg.loops.agc.as_ref().expect("caller checked");
        let mut issues = Vec::new();
        let mut system = AgcSystem::default();
        for area in system.areas.iter_mut() {
            area.inertia = c.inertia;
            area.damping = c.damping;
            area.droop = c.droop;
            area.governor_tc = c.governor_tc;
            area.turbine_tc = c.turbine_tc;
        }
        system.tie_stiffness = c.tie_stiffness;
        system.bias = [c.bias, c.bias];
        system.smoothing_tc = c.smoothing_tc;
        system.kp = c.kp;
        system.ki = c.ki;
        system.dt = c.dt_s;
        if let Err(e) = system.validate() {
            issues.push(format!("loops.agc: {e}"));
        }
        if c.trace_every == 0 {
            issues.push("loops.agc.trace_every must be >= 1".to_string());
        }

        let mut attacks = Vec::new();
        for a in &cfg.attacks.sensor {
            let kind = match a.kind.as_str() {
                "none" => AttackKind::None,
                "bias" => AttackKind::Bias,
                "scale" => AttackKind::Scale,
                "replay" => AttackKind::Replay,
                "noise" => AttackKind::Noise,
                other => {
                    issues.push(format!("attacks.sensor: unknown kind {other:?}"));
                    AttackKind::None
                }
            };
            let target = match a.target.as_str() {
                "freq" => AttackTarget::Freq,
                "tie_flow" => AttackTarget::TieFlow,
                "both" => AttackTarget::Both,
                other => {
                    issues.push(format!("attacks.sensor: unknown target {other:?}"));
                    AttackTarget::Both
                }
            };
            let attack = SensorAttack {
                kind,
                magnitude: a.magnitude,
                target,
                start_s: a.start_s,
                end_s: a.end_s,
            };
            if let Err(e) = attack.validate() {
                issues.push(format!("attacks.sensor: {e}"));
            }
            attacks.push(attack);
        }

        let seed = cfg.seeds.for_module("agc");
        let mut sim_cfg = AgcSimConfig::new(cfg.scenario.horizon_s, seed, FROZEN_THRESHOLDS);
        sim_cfg.system = system;
        sim_cfg.watermark = WatermarkKey::new(seed, c.watermark_variance);
        sim_cfg.attacks = attacks;
        sim_cfg.noise_sigma = c.noise_sigma;
        sim_cfg.noise_seed = seed;
        sim_cfg.detector_window = c.detector_window;
        sim_cfg.detector_period = c.detector_period;
        sim_cfg.load_steps = cfg
            .disturbances
            .load_step
            .iter()
            .map(|s| LoadStep {
                t_s: s.t_s,
                area: s.area,
                delta_pu: s.delta_pu,
            })
            .collect();
        if sim_cfg.load_steps.iter().any(|s| s.area > 1) {
            issues.push("disturbances.load_step.area must be 0 or 1".to_string());
        }

        if !issues.is_empty() {
            return Err(issues);
        }
        let sim = AgcSimulation::new(sim_cfg).map_err(|e| vec![format!("loops.agc: {e}")])?;
        Ok(Self {
            sim,
            trace_every: c.trace_every,
            steps: 0,
            dt_s: c.dt_s,
        })
    }
}

impl ControlLoop for AgcLoop {
    fn spec(&self) -> LoopSpec {
        LoopSpec::new("loop2.agc", self.dt_s)
    }

    fn activate(&mut self, _t: f64, _bus: &SignalBus, sink: &mut LoopSink) -> Result<(), String> {
        let out = self.sim.step().map_err(|e| e.to_string())?;
        let r = out.record;
        if self.steps.is_multiple_of(self.trace_every) {
            sink.emit("area1", "freq_a1", r.freq_dev[0]);
            sink.emit("area2", "freq_a2", r.freq_dev[1]);
            sink.emit("sys", "ptie", r.tie_flow);
            sink.emit("area1", "ace_a1", r.ace[0]);
            sink.emit("area1", "sace_a1", r.sace[0]);
            sink.emit("area1", "pset_a1", r.setpoint[0]);
        }
        if let Some(d) = out.detection {
            sink.emit("sys", "wm_corr", d.correlation_stat);
            sink.emit("sys", "wm_var", d.variance_stat);
            sink.emit("sys", "alarm", if d.alarm { 1.0 } else { 0.0 });
        }
        sink.publish("agc.freq_a1", r.freq_dev[0]);
        sink.publish("agc.ptie", r.tie_flow);
        self.steps += 1;
        Ok(())
    }

    fn state_digest(&self) -> String {
        let s = self.sim.system();
        digest_numbers(&[
            s.areas[0].freq_dev,
            s.areas[1].freq_dev,
            s.tie_flow,
            s.areas[0].mech_power,
            s.areas[1].mech_power,
            s.setpoint[0],
            s.setpoint[1],
        ])
    }
}

// ---------------------------------------------------------------------------
// Dispatch (economic dispatch / unit commitment / scenario dispatch)

enum DispatchMode {
    Static(DemandSpec),
    Hourly(Vec<DemandSpec>),
    Scenarios(Vec<DemandSpec>, f64, f64),
}

struct DispatchLoop {
    gens: Vec<Generator>,
    net: Network,
    s_base_mva: f64,
    period_s: f64,
    mode: DispatchMode,
    commitment: Option<CommitmentSchedule>,
    hour_results: Vec<Option<DispatchResult>>,
    static_result: Option<DispatchResult>,
}

impl DispatchLoop {
    fn build(cfg: &ScenarioConfig, net: Option<&Network>) -> Result<Self, Vec<String>> {
        let c = cfg.loops.dispatch.as_ref().expect("caller checked");
        let mut issues = Vec::new();
        let Some(net) = net else {
            return Err(vec![
                "loops.dispatch requires a [network] section".to_string()
            ]);
        };
        let s_base_mva = cfg.network.as_ref().map(|n| n.s_base_mva).unwrap_or(100.0);

        let mut gens = Vec::new();
        for g in &c.generator {
            let segments = match (&g.segments, g.price) {
                (Some(segs), _) => segs
                    .iter()
                    .map(|s| CostSegment {
                        mw: s.mw,
                        price: s.price,
                    })
                    .collect(),
                (None, Some(price)) => vec![CostSegment { mw: g.p_max, price }],
                (None, None) => {
                    issues.push(format!(
                        "loops.dispatch.generator {}: needs price or segments",
                        g.id
                    ));
                    vec![CostSegment {
                        mw: g.p_max,
                        price: 0.0,
                    }]
                }
            };
            let gen = Generator {
                id: g.id,
                bus: g.bus,
                segments,
                p_min: g.p_min,
                p_max: g.p_max,
                startup_cost: g.startup_cost,
                committed: g.committed,
            };
            if let Err(e) = gen.validate() {
                issues.push(format!("loops.dispatch: {e}"));
            }
            gens.push(gen);
        }
        if gens.is_empty() {
            issues.push("loops.dispatch: at least one generator".to_string());
        }

        let n_buses = net.n_buses();
        let demand_len_ok = |v: &Vec<f64>| v.len() == n_buses;
        let mode = if let Some(h) = &c.hourly_demand_mw {
            if h.is_empty() || h.iter().any(|d| !demand_len_ok(d)) {
                issues.push(
                    "loops.dispatch.hourly_demand_mw rows must match the bus count".to_string(),
                );
            }
            DispatchMode::Hourly(h.iter().cloned().map(DemandSpec::new).collect())
        } else if let Some(s) = &c.scenarios_mw {
            if s.is_empty() || s.iter().any(|d| !demand_len_ok(d)) {
                issues
                    .push("loops.dispatch.scenarios_mw rows must match the bus count".to_string());
            }
            DispatchMode::Scenarios(
                s.iter().cloned().map(DemandSpec::new).collect(),
                c.epsilon,
                c.voll,
            )
        } else if let Some(d) = &c.demand_mw {
            if !demand_len_ok(d) {
                issues.push("loops.dispatch.demand_mw must match the bus count".to_string());
            }
            DispatchMode::Static(DemandSpec::new(d.clone()))
        } else {
            issues.push(
                "loops.dispatch needs demand_mw, hourly_demand_mw or scenarios_mw".to_string(),
            );
            DispatchMode::Static(DemandSpec::new(vec![0.0; n_buses]))
        };

        if !issues.is_empty() {
            return Err(issues);
        }
        Ok(Self {
            gens,
            net: net.clone(),
            s_base_mva,
            period_s: c.period_s,
            mode,
            commitment: None,
            hour_results: Vec::new(),
            static_result: None,
        })
    }

    fn emit_result(sink: &mut LoopSink, gens: &[Generator], r: &DispatchResult) {
        sink.emit("market", "cost", r.total_cost);
        for (gi, g) in gens.iter().enumerate() {
            sink.emit(&format!("unit{}", g.id), "mw", r.output_mw[gi]);
        }
        for (b, lmp) in r.lmp.iter().enumerate() {
            sink.emit(&format!("bus{b}"), "lmp", *lmp);
        }
        sink.publish("dispatch.cost", r.total_cost);
    }
}

impl ControlLoop for DispatchLoop {
    fn spec(&self) -> LoopSpec {
        LoopSpec::new("loop2.dispatch", self.period_s)
    }

    fn activate(&mut self, t: f64, _bus: &SignalBus, sink: &mut LoopSink) -> Result<(), String> {
        match &self.mode {
            DispatchMode::Static(demand) => {
                if self.static_result.is_none() {
                    let r = economic_dispatch(&self.gens, demand, &self.net, self.s_base_mva)
                        .map_err(|e| e.to_string())?;
                    self.static_result = Some(r);
                }
                let r = self.static_result.as_ref().expect("just solved");
                Self::emit_result(sink, &self.gens, r);
            }
            DispatchMode::Scenarios(scenarios, eps, voll) => {
                if self.static_result.is_none() {
                    let r = scenario_dispatch(
                        &self.gens,
                        scenarios,
                        &self.net,
                        self.s_base_mva,
                        *eps,
                        *voll,
                    )
                    .map_err(|e| e.to_string())?;
                    self.static_result = Some(r);
                }
                let r = self.static_result.as_ref().expect("just solved");
                Self::emit_result(sink, &self.gens, r);
            }
            DispatchMode::Hourly(hours) => {
                if self.commitment.is_none() {
                    let sched = unit_commitment(&self.gens, hours, &self.net, self.s_base_mva)
                        .map_err(|e| e.to_string())?;
                    self.hour_results = vec![None; hours.len()];
                    self.commitment = Some(sched);
                }
                let sched = self.commitment.as_ref().expect("just solved");
                let hour = ((t / 3600.0).floor() as usize).min(hours.len() - 1);
                if self.hour_results[hour].is_none() {
                    let mut committed = self.gens.clone();
                    for (u, g) in committed.iter_mut().enumerate() {
                        g.committed = sched.on[hour][u];
                    }
                    let r = economic_dispatch(&committed, &hours[hour], &self.net, self.s_base_mva)
                        .map_err(|e| e.to_string())?;
                    self.hour_results[hour] = Some(r);
                }
                let r = self.hour_results[hour].as_ref().expect("just solved");
                Self::emit_result(sink, &self.gens, r);
            }
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<Vec<OutputFile>, String> {
        let mut out = String::from("hour,unit_id,on,mw,lmp_bus,cost\n");
        let rows = |out: &mut String,
                    hour: usize,
                    gens: &[Generator],
                    on: &dyn Fn(usize) -> bool,
                    r: &DispatchResult| {
            for (gi, g) in gens.iter().enumerate() {
                out.push_str(&csv_line(&[
                    hour.to_string(),
                    g.id.to_string(),
                    if on(gi) {
                        "1".to_string()
                    } else {
                        "0".to_string()
                    },
                    sig12(r.output_mw[gi]),
                    sig12(r.lmp[g.bus]),
                    sig12(r.total_cost),
                ]));
            }
        };
        match (&self.commitment, &self.static_result) {
            (Some(sched), _) => {
                for (hour, result) in self.hour_results.iter().enumerate() {
                    if let Some(r) = result {
                        rows(&mut out, hour, &self.gens, &|gi| sched.on[hour][gi], r);
                    }
                }
            }
            (None, Some(r)) => {
                rows(&mut out, 0, &self.gens, &|gi| self.gens[gi].committed, r);
            }
            (None, None) => {}
        }
        Ok(vec![OutputFile {
            name: "dispatch.csv".to_string(),
            contents: out,
        }])
    }

    fn state_digest(&self) -> String {
        match (&self.commitment, &self.static_result) {
            (Some(sched), _) => digest_numbers(&[sched.total_cost]),
            (None, Some(r)) => {
                let mut parts = vec![r.total_cost];
                parts.extend_from_slice(&r.output_mw);
                digest_numbers(&parts)
            }
            (None, None) => "unsolved".to_string(),
        }
    }
}

// ---------------------------------------------------------------------------
// Battery storage

struct BesLoop {
    cfg: BesConfig,
    markets: Vec<RegulationMarket>,
    epsilon: f64,
    interval_h: f64,
    plan: Option<BesPlan>,
    k: usize,
}

impl BesLoop {
    fn build(cfg: &ScenarioConfig) -> Result<Self, Vec<String>> {
        let c = cfg.loops.bes.as_ref().expect("caller checked");
        let mut issues = Vec::new();
        let bes = BesConfig {
            capacity_max: c.capacity_max,
            power_rating: c.power_rating,
            soc_min: c.soc_min,
            soc_max: c.soc_max,
            soc_initial: c.soc_initial,
            efficiency: c.efficiency,
            interval_h: c.interval_h,
            aging_coeff: c.aging_coeff,
        };
        if let Err(e) = bes.validate() {
            issues.push(format!("loops.bes: {e}"));
        }
        let signals: Vec<Vec<f64>> = match (&c.signal, &c.scenarios) {
            (Some(s), None) => vec![s.clone()],
            (None, Some(sc)) if !sc.is_empty() => sc.clone(),
            _ => {
                issues.push("loops.bes needs signal or scenarios".to_string());
                vec![vec![0.0]]
            }
        };
        let markets: Vec<RegulationMarket> = signals
            .into_iter()
            .map(|signal| RegulationMarket {
                price: c.price,
                performance_floor: c.performance_floor,
                signal,
            })
            .collect();
        for m in &markets {
            if let Err(e) = m.validate() {
                issues.push(format!("loops.bes: {e}"));
            }
        }
        if !issues.is_empty() {
            return Err(issues);
        }
        Ok(Self {
            cfg: bes,
            markets,
            epsilon: c.epsilon,
            interval_h: c.interval_h,
            plan: None,
            k: 0,
        })
    }
}

impl ControlLoop for BesLoop {
    fn spec(&self) -> LoopSpec {
        LoopSpec::new("loop9.bes", self.interval_h * 3600.0)
    }

    fn activate(&mut self, _t: f64, _bus: &SignalBus, sink: &mut LoopSink) -> Result<(), String> {
        if self.plan.is_none() {
            let plan = optimize_bes_plan(&self.cfg, &self.markets, self.epsilon)
                .map_err(|e| e.to_string())?;
            sink.emit("bes", "capacity", plan.capacity);
            sink.emit("bes", "score", plan.score);
            sink.emit("bes", "revenue", plan.revenue);
            sink.publish("bes.capacity", plan.capacity);
            self.plan = Some(plan);
        }
        let plan = self.plan.as_ref().expect("just planned");
        let trace = &plan.traces[0];
        if self.k < trace.dispatch.len() {
            sink.emit("bes", "r", self.markets[0].signal[self.k]);
            sink.emit("bes", "b", trace.dispatch[self.k]);
            sink.emit("bes", "e", trace.soc[self.k]);
        }
        self.k += 1;
        Ok(())
    }

    fn finish(&mut self) -> Result<Vec<OutputFile>, String> {
        let mut out = String::from("k,r,b,e\n");
        if let Some(plan) = &self.plan {
            let trace = &plan.traces[0];
            for k in 0..trace.dispatch.len() {
                out.push_str(&csv_line(&[
                    k.to_string(),
                    sig12(self.markets[0].signal[k]),
                    sig12(trace.dispatch[k]),
                    sig12(trace.soc[k]),
                ]));
            }
            out.push_str(&csv_line(&[
                "summary".to_string(),
                sig12(plan.capacity),
                sig12(plan.score),
                sig12(plan.revenue),
            ]));
        }
        Ok(vec![OutputFile {
            name: "bes.csv".to_string(),
            contents: out,
        }])
    }

    fn state_digest(&self) -> String {
        match &self.plan {
            Some(p) => {
                let trace = &p.traces[0];
                let last_soc = trace.soc.last().copied().unwrap_or(self.cfg.soc_initial);
                digest_numbers(&[p.capacity, p.score, p.revenue, last_soc])
            }
            None => "unplanned".to_string(),
        }
    }
}

// ---------------------------------------------------------------------------
// EV charging coordination

struct EvLoop {
    sessions: Vec<EvSession>,
    base_load: Vec<f64>,
    dk_h: f64,
    gamma: f64,
    max_iters: usize,
    centralized: bool,
    profile: Option<ChargingProfile>,
    iterations: usize,
    slot: usize,
}

impl EvLoop {
    fn build(cfg: &ScenarioConfig) -> Result<Self, Vec<String>> {
        let c = cfg.loops.ev.as_ref().expect("caller checked");
        let mut issues = Vec::new();
        let horizon = c.base_load_kw.len();
        if horizon == 0 {
            issues.push("loops.ev.base_load_kw must be non-empty".to_string());
        }
        let sessions: Vec<EvSession> = c
            .session
            .iter()
            .map(|s| EvSession {
                id: s.id,
                k_start: s.k_start,
                k_end: s.k_end,
                rate_max: s.rate_max,
                efficiency: s.efficiency,
                battery_capacity: s.battery_capacity,
                soc_start: s.soc_start,
                soc_end: s.soc_end,
            })
            .collect();
        for s in &sessions {
            if let Err(e) = s.validate(horizon, c.dk_h) {
                issues.push(format!("loops.ev: {e}"));
            }
        }
        let centralized = match c.mode.as_str() {
            "decentralized" => false,
            "centralized" => true,
            other => {
                issues.push(format!("loops.ev.mode: unknown value {other:?}"));
                false
            }
        };
        if !issues.is_empty() {
            return Err(issues);
        }
        let gamma = c
            .gamma
            .unwrap_or(1.0 / (2.0 * (sessions.len() as f64 + 1.0)));
        Ok(Self {
            sessions,
            base_load: c.base_load_kw.clone(),
            dk_h: c.dk_h,
            gamma,
            max_iters: c.max_iters,
            centralized,
            profile: None,
            iterations: 0,
            slot: 0,
        })
    }
}

impl ControlLoop for EvLoop {
    fn spec(&self) -> LoopSpec {
        LoopSpec::new("loop12.ev", self.dk_h * 3600.0)
    }

    fn activate(&mut self, _t: f64, _bus: &SignalBus, sink: &mut LoopSink) -> Result<(), String> {
        if self.profile.is_none() {
            let horizon = self.base_load.len();
            let profile = if self.centralized {
                centralized_schedule(&self.sessions, &self.base_load, horizon, self.dk_h)
                    .map_err(|e| e.to_string())?
            } else {
                let run = decentralized_schedule(
                    &self.sessions,
                    &self.base_load,
                    horizon,
                    self.dk_h,
                    self.gamma,
                    self.max_iters,
                )
                .map_err(|e| e.to_string())?;
                self.iterations = run.iterations;
                run.profile
            };
            sink.emit("agg", "iterations", self.iterations as f64);
            self.profile = Some(profile);
        }
        let profile = self.profile.as_ref().expect("just planned");
        if self.slot < self.base_load.len() {
            let agg = profile.aggregate(&self.base_load);
            sink.emit("agg", "base_load", self.base_load[self.slot]);
            sink.emit("agg", "aggregate_load", agg[self.slot]);
            for (n, s) in self.sessions.iter().enumerate() {
                sink.emit(&format!("ev{}", s.id), "rate", profile.rates[n][self.slot]);
            }
            sink.publish("ev.aggregate_load", agg[self.slot]);
        }
        self.slot += 1;
        Ok(())
    }

    fn finish(&mut self) -> Result<Vec<OutputFile>, String> {
        let mut header = vec![
            "slot".to_string(),
            "base_load".to_string(),
            "aggregate_load".to_string(),
        ];
        for s in &self.sessions {
            header.push(format!("ev_{}", s.id));
        }
        let mut out = header.join(",");
        out.push('\n');
        if let Some(profile) = &self.profile {
            let agg = profile.aggregate(&self.base_load);
            for k in 0..self.base_load.len() {
                let mut fields = vec![k.to_string(), sig12(self.base_load[k]), sig12(agg[k])];
                for row in &profile.rates {
                    fields.push(sig12(row[k]));
                }
                out.push_str(&csv_line(&fields));
            }
        }
        Ok(vec![OutputFile {
            name: "ev.csv".to_string(),
            contents: out,
        }])
    }

    fn state_digest(&self) -> String {
        match &self.profile {
            Some(p) => {
                let agg = p.aggregate(&self.base_load);
                digest_numbers(&agg)
            }
            None => "unplanned".to_string(),
        }
    }
}

// ---------------------------------------------------------------------------
// EVCS placement

struct EvcsLoop {
    prob: PlacementProblem,
    horizon_s: f64,
    placement: Option<Placement>,
}

impl EvcsLoop {
    fn build(cfg: &ScenarioConfig, net: Option<&Network>) -> Result<Self, Vec<String>> {
        let c = cfg.loops.evcs.as_ref().expect("caller checked");
        let Some(net) = net else {
            return Err(vec![
                "loops.evcs requires a radial [feeder] (or radial [network]) section".to_string(),
            ]);
        };
        let n = net.n_buses();
        let mut issues = Vec::new();
        let zeros = vec![0.0; n];
        let base_p = c.base_load_p.clone().unwrap_or_else(|| zeros.clone());
        let base_q = c.base_load_q.clone().unwrap_or(zeros);
        if base_p.len() != n || base_q.len() != n {
            issues.push("loops.evcs base loads must cover every bus".to_string());
        }
        if c.fixed_cost.len() != c.candidates.len() {
            issues.push("loops.evcs.fixed_cost must match candidates".to_string());
        }
        if !issues.is_empty() {
            return Err(issues);
        }
        let base_load = base_p
            .iter()
            .zip(&base_q)
            .map(|(&p, &q)| PqLoad::new(p, q))
            .collect();
        let kva_base = cfg
            .feeder
            .as_ref()
            .or(cfg.network.as_ref())
            .map(|n| n.kva_base)
            .unwrap_or(1000.0);
        Ok(Self {
            prob: PlacementProblem {
                net: net.clone(),
                candidates: c.candidates.clone(),
                fixed_cost: c.fixed_cost.clone(),
                per_spot_cost: c.per_spot_cost,
                spot_power_kw: c.spot_power_kw,
                demand_floor_kw: c.demand_floor_kw,
                budget: c.budget,
                v_min: c.v_min,
                v_max: c.v_max,
                y_max: c.y_max,
                base_load,
                kva_base,
            },
            horizon_s: cfg.scenario.horizon_s,
            placement: None,
        })
    }
}

impl ControlLoop for EvcsLoop {
    fn spec(&self) -> LoopSpec {
        // one-shot planning activation at t = 0
        LoopSpec::new("loop7.evcs", self.horizon_s + 1.0)
    }

    fn activate(&mut self, _t: f64, _bus: &SignalBus, sink: &mut LoopSink) -> Result<(), String> {
        let placement = evcs_place(&self.prob).map_err(|e| e.to_string())?;
        sink.emit("plan", "cost", placement.cost);
        for (i, &bus) in self.prob.candidates.iter().enumerate() {
            sink.emit(
                &format!("node{bus}"),
                "x",
                if placement.built[i] { 1.0 } else { 0.0 },
            );
            sink.emit(&format!("node{bus}"), "y", placement.spots[i] as f64);
        }
        for (b, &vsq) in placement.voltage_sq.iter().enumerate() {
            sink.emit(&format!("node{b}"), "voltage_sq", vsq);
        }
        self.placement = Some(placement);
        Ok(())
    }

    fn finish(&mut self) -> Result<Vec<OutputFile>, String> {
        let mut out = String::from("node,x,y,voltage_sq\n");
        if let Some(p) = &self.placement {
            for b in 0..self.prob.net.n_buses() {
                let (x, y) = match self.prob.candidates.iter().position(|&c| c == b) {
                    Some(i) => (if p.built[i] { 1 } else { 0 }, p.spots[i]),
                    None => (0, 0),
                };
                out.push_str(&csv_line(&[
                    b.to_string(),
                    x.to_string(),
                    y.to_string(),
                    sig12(p.voltage_sq[b]),
                ]));
            }
            out.push_str(&csv_line(&[
                "total_cost".to_string(),
                sig12(p.cost),
                String::new(),
                String::new(),
            ]));
        }
        Ok(vec![OutputFile {
            name: "evcs.csv".to_string(),
            contents: out,
        }])
    }

    fn state_digest(&self) -> String {
        match &self.placement {
            Some(p) => {
                let mut parts = vec![p.cost];
                parts.extend(p.spots.iter().map(|&y| y as f64));
                digest_numbers(&parts)
            }
            None => "unplanned".to_string(),
        }
    }
}

// ---------------------------------------------------------------------------
// Demand (two-layer thermal load control)

struct DemandLoop {
    houses: Vec<ThermalHouse>,
    price: Vec<f64>,
    ambient: Vec<f64>,
    budget_kwh: f64,
    slot_h: f64,
    dt_h: f64,
    ctrl: TrackingController,
    plan: Option<FleetPlan>,
    csv: String,
}

impl DemandLoop {
    fn build(cfg: &ScenarioConfig) -> Result<Self, Vec<String>> {
        let c = cfg.loops.demand.as_ref().expect("caller checked");
        let mut issues = Vec::new();
        let mut houses: Vec<ThermalHouse> = c
            .house
            .iter()
            .map(|h| ThermalHouse {
                id: h.id,
                alpha: h.alpha,
                beta: h.beta,
                comfort_low: h.comfort_low,
                comfort_high: h.comfort_high,
                temp: h.temp,
                setpoint: 0.5 * (h.comfort_low + h.comfort_high),
                deadband: h.deadband,
                ac_power: h.ac_power,
                efficiency: h.efficiency,
                on: false,
            })
            .collect();
        if let Some(fleet) = &c.fleet {
            let rng = CounterRng::for_module(cfg.seeds.for_module("demand"), "demand.fleet");
            let base = houses.len();
            for i in 0..fleet.count {
                let jitter = |slot: u64| {
                    1.0 + fleet.jitter * (2.0 * rng.uniform_open01(i as u64 * 8 + slot) - 1.0)
                };
                let mid = 0.5 * (fleet.comfort_low + fleet.comfort_high);
                let span = 0.5 * (fleet.comfort_high - fleet.comfort_low);
                // initial temperatures spread across the comfort band
                let u = 2.0 * rng.uniform_open01(i as u64 * 8 + 2) - 1.0;
                houses.push(ThermalHouse {
                    id: base + i,
                    alpha: fleet.alpha * jitter(0),
                    beta: fleet.beta * jitter(1),
                    comfort_low: fleet.comfort_low,
                    comfort_high: fleet.comfort_high,
                    temp: mid + 0.8 * span * u,
                    setpoint: mid,
                    deadband: fleet.deadband,
                    ac_power: fleet.ac_power,
                    efficiency: fleet.efficiency,
                    on: false,
                });
            }
        }
        if houses.is_empty() {
            issues.push("loops.demand: at least one house (or a fleet template)".to_string());
        }
        for h in &houses {
            if let Err(e) = h.validate() {
                issues.push(format!("loops.demand: {e}"));
            }
            if c.dt_h > 0.1 / h.alpha {
                issues.push(format!(
                    "loops.demand.dt_h {} too large for house {} alpha {}",
                    c.dt_h, h.id, h.alpha
                ));
            }
        }
        if c.price.len() != c.ambient.len() || c.price.is_empty() {
            issues
                .push("loops.demand price and ambient must have equal nonzero length".to_string());
        }
        if !issues.is_empty() {
            return Err(issues);
        }
        let mut csv = String::from("t,p_ref,p_total,v");
        for h in houses.iter().take(20) {
            csv.push_str(&format!(",theta_{}", h.id));
        }
        csv.push('\n');
        Ok(Self {
            houses,
            price: c.price.clone(),
            ambient: c.ambient.clone(),
            budget_kwh: c.energy_budget_kwh,
            slot_h: c.slot_h,
            dt_h: c.dt_h,
            ctrl: TrackingController::new(c.kp, c.ki),
            plan: None,
            csv,
        })
    }
}

impl ControlLoop for DemandLoop {
    fn spec(&self) -> LoopSpec {
        LoopSpec::new("loop13.demand", self.dt_h * 3600.0)
    }

    fn activate(&mut self, t: f64, _bus: &SignalBus, sink: &mut LoopSink) -> Result<(), String> {
        if self.plan.is_none() {
            let plan = lp_relaxed_schedule(
                &self.houses,
                &self.price,
                &self.ambient,
                self.budget_kwh,
                self.slot_h,
            )
            .map_err(|e| e.to_string())?;
            self.plan = Some(plan);
        }
        let plan = self.plan.as_ref().expect("just planned");
        let slot = (((t / 3600.0) / self.slot_h).floor() as usize).min(self.price.len() - 1);
        let p_ref = plan.p_ref_total[slot];
        let ambient = self.ambient[slot];
        let out = tracking_step(&mut self.houses, ambient, p_ref, &mut self.ctrl, self.dt_h);

        sink.emit("fleet", "p_ref", p_ref);
        sink.emit("fleet", "p_total", out.p_total);
        sink.emit("fleet", "v", out.command);
        sink.publish("demand.p_total", out.p_total);

        let mut fields = vec![
            sig12(t),
            sig12(p_ref),
            sig12(out.p_total),
            sig12(out.command),
        ];
        for h in self.houses.iter().take(20) {
            sink.emit(&format!("house{}", h.id), "theta", h.temp);
            fields.push(sig12(h.temp));
        }
        self.csv.push_str(&csv_line(&fields));
        Ok(())
    }

    fn finish(&mut self) -> Result<Vec<OutputFile>, String> {
        Ok(vec![OutputFile {
            name: "demand.csv".to_string(),
            contents: self.csv.clone(),
        }])
    }

    fn state_digest(&self) -> String {
        let temps: Vec<f64> = self.houses.iter().map(|h| h.temp).collect();
        digest_numbers(&temps)
    }
}

// ---------------------------------------------------------------------------
// Microgrid

struct MicrogridLoop {
    state: MicrogridState,
    events: Vec<(f64, GridMode)>,
    pcc_target: Option<f64>,
    restore: bool,
    targets: Vec<VoltageTarget>,
    period_s: f64,
    step_idx: usize,
    csv: String,
    last: Option<SteadyState>,
}

impl MicrogridLoop {
    fn build(cfg: &ScenarioConfig) -> Result<Self, Vec<String>> {
        let c = cfg.loops.microgrid.as_ref().expect("caller checked");
        let mut issues = Vec::new();
        let inverters: Vec<DroopInverter> = c
            .inverter
            .iter()
            .map(|i| {
                let mut inv = DroopInverter::new(i.id, i.droop_mp, i.droop_mq, i.p_max);
                inv.nominal_freq = i.nominal_freq;
                inv.nominal_volt = i.nominal_volt;
                inv.p_setpoint = i.p_setpoint;
                inv.q_setpoint = i.q_setpoint;
                inv.volt_offset_max = i.volt_offset_max;
                inv
            })
            .collect();
        if inverters.is_empty() {
            issues.push("loops.microgrid: at least one inverter".to_string());
        }
        let parse_mode = |s: &str, issues: &mut Vec<String>| match s {
            "islanded" => GridMode::Islanded,
            "grid_connected" => GridMode::GridConnected,
            other => {
                issues.push(format!("microgrid mode: unknown value {other:?}"));
                GridMode::Islanded
            }
        };
        let mode = parse_mode(&c.mode, &mut issues);
        let mut events: Vec<(f64, GridMode)> = cfg
            .disturbances
            .islanding
            .iter()
            .map(|e| (e.t_s, parse_mode(&e.mode, &mut issues)))
            .collect();
        events.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times"));
        let targets: Vec<VoltageTarget> = c
            .critical_target
            .iter()
            .map(|t| VoltageTarget {
                inverter: t.inverter,
                v_target: t.v_target,
            })
            .collect();
        for t in &targets {
            if t.inverter >= inverters.len() {
                issues.push(format!(
                    "loops.microgrid.critical_target references inverter {}",
                    t.inverter
                ));
            }
        }
        if !issues.is_empty() {
            return Err(issues);
        }
        let mut csv = String::from("step,mode,omega,pcc_flow");
        for inv in &inverters {
            csv.push_str(&format!(",p_{},q_{}", inv.id, inv.id));
        }
        csv.push('\n');
        Ok(Self {
            state: MicrogridState {
                inverters,
                load_p: c.load_p,
                load_q: c.load_q,
                mode,
            },
            events,
            pcc_target: c.pcc_target,
            restore: c.restore,
            targets,
            period_s: c.period_s,
            step_idx: 0,
            csv,
            last: None,
        })
    }
}

impl ControlLoop for MicrogridLoop {
    fn spec(&self) -> LoopSpec {
        LoopSpec::new("loop6.microgrid", self.period_s)
    }

    fn activate(&mut self, t: f64, _bus: &SignalBus, sink: &mut LoopSink) -> Result<(), String> {
        for (t_event, mode) in &self.events {
            if *t_event <= t {
                self.state.mode = *mode;
            }
        }
        let ss = match self.state.mode {
            GridMode::GridConnected => {
                if let Some(target) = self.pcc_target {
                    let p_new =
                        tertiary_setpoint(&self.state, target).map_err(|e| e.to_string())?;
                    for (inv, p) in self.state.inverters.iter_mut().zip(&p_new) {
                        inv.p_setpoint = *p;
                    }
                }
                grid_connected_steady_state(&self.state).map_err(|e| e.to_string())?
            }
            GridMode::Islanded => {
                if self.restore {
                    let offsets =
                        secondary_restore(&self.state, &self.targets).map_err(|e| e.to_string())?;
                    offsets.apply(&mut self.state);
                }
                droop_steady_state(&self.state).map_err(|e| e.to_string())?
            }
        };

        let mode_flag = match self.state.mode {
            GridMode::Islanded => 1.0,
            GridMode::GridConnected => 0.0,
        };
        sink.emit("mg", "mode", mode_flag);
        sink.emit("mg", "omega", ss.frequency);
        sink.emit("mg", "pcc_flow", ss.pcc_flow);
        for (i, inv) in self.state.inverters.iter().enumerate() {
            sink.emit(&format!("inv{}", inv.id), "p", ss.p[i]);
            sink.emit(&format!("inv{}", inv.id), "q", ss.q[i]);
        }
        sink.publish("microgrid.omega", ss.frequency);
        sink.publish("microgrid.pcc_flow", ss.pcc_flow);

        let mut fields = vec![
            self.step_idx.to_string(),
            mode_flag.to_string(),
            sig12(ss.frequency),
            sig12(ss.pcc_flow),
        ];
        for i in 0..self.state.inverters.len() {
            fields.push(sig12(ss.p[i]));
            fields.push(sig12(ss.q[i]));
        }
        self.csv.push_str(&csv_line(&fields));
        self.step_idx += 1;
        self.last = Some(ss);
        Ok(())
    }

    fn finish(&mut self) -> Result<Vec<OutputFile>, String> {
        Ok(vec![OutputFile {
            name: "microgrid.csv".to_string(),
            contents: self.csv.clone(),
        }])
    }

    fn state_digest(&self) -> String {
        match &self.last {
            Some(ss) => {
                let mut parts = vec![ss.frequency, ss.pcc_flow];
                parts.extend_from_slice(&ss.p);
                parts.extend_from_slice(&ss.q);
                digest_numbers(&parts)
            }
            None => "unsolved".to_string(),
        }
    }
}
