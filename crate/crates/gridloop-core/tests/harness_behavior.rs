//! Harness-level behavior: attack timing in composed scenarios, loop
//! isolation, and registry documentation.

use gridloop_core::harness::{parse_scenario, registry, run_scenario, LoopRole};

const AGC_ATTACK_SCENARIO: &str = r#"
[scenario]
name = "agc-bias-attack"
horizon_s = 100.0

[loops.agc]
noise_sigma = 0.001

[attacks]
[[attacks.sensor]]
kind = "bias"
magnitude = 0.0003
target = "freq"
start_s = 60.0
end_s = 100.0

[seeds]
scenario = 3
"#;

/// Alarm records appear at or after the attack start and never before:
/// the no-attack prefix stays alarm-free at the calibrated thresholds.
#[test]
fn bias_attack_alarms_only_after_onset() {
    let cfg = parse_scenario(AGC_ATTACK_SCENARIO).unwrap();
    let artifacts = run_scenario(&cfg).unwrap();
    let trace = &artifacts.file("trace.csv").unwrap().contents;

    let mut saw_pre_attack_detection = false;
    let mut first_alarm_t: Option<f64> = None;
    for line in trace.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields[3] != "alarm" {
            continue;
        }
        let t: f64 = fields[0].parse().unwrap();
        let value: f64 = fields[4].parse().unwrap();
        if t < 60.0 {
            saw_pre_attack_detection = true;
            assert_eq!(value, 0.0, "no alarm before the attack at t = {t}");
        } else if value > 0.5 && first_alarm_t.is_none() {
            first_alarm_t = Some(t);
        }
    }
    assert!(
        saw_pre_attack_detection,
        "detector ran during the clean prefix"
    );
    let first = first_alarm_t.expect("a 3e-4 pu bias must trip the detector");
    assert!(first >= 60.0, "first alarm at {first}");
}

const AGC_EV_SCENARIO: &str = r#"
[scenario]
name = "isolation"
horizon_s = 20.0

[loops.agc]
noise_sigma = 0.001
trace_every = 5

[loops.ev]
base_load_kw = [12.0, 8.0, 4.0, 6.0]
[[loops.ev.session]]
id = 0
k_start = 0
k_end = 3
rate_max = 3.0
battery_capacity = 5.0
soc_start = 0.0
soc_end = 1.0

[disturbances]
[[disturbances.load_step]]
t_s = 5.0
area = 0
delta_pu = 0.05

[seeds]
scenario = 9
"#;

/// Disabling the EV loop leaves the AGC trace byte-identical: no shared
/// signals and per-module seeded randomness keep the loops isolated.
#[test]
fn disabling_ev_leaves_agc_trace_unchanged() {
    let with_ev = parse_scenario(AGC_EV_SCENARIO).unwrap();
    let without_ev = {
        let mut cfg = parse_scenario(AGC_EV_SCENARIO).unwrap();
        cfg.loops.ev = None;
        cfg
    };
    let a = run_scenario(&with_ev).unwrap();
    let b = run_scenario(&without_ev).unwrap();
    let agc_lines = |trace: &str| -> Vec<String> {
        trace
            .lines()
            .filter(|l| l.split(',').nth(1) == Some("loop2.agc"))
            .map(|l| l.to_string())
            .collect()
    };
    let lines_a = agc_lines(&a.file("trace.csv").unwrap().contents);
    let lines_b = agc_lines(&b.file("trace.csv").unwrap().contents);
    assert!(!lines_a.is_empty());
    assert_eq!(
        lines_a, lines_b,
        "AGC records must not depend on the EV loop"
    );
}

/// The registry documents the whole loop table: gas supply and the
/// contract/billing loops are stubs, the simulator's loop families are
/// executable.
#[test]
fn registry_documents_stub_and_executable_loops() {
    let reg = registry();
    let stub_ids: Vec<&str> = reg
        .iter()
        .filter(|e| e.role == LoopRole::Stub)
        .map(|e| e.loop_id)
        .collect();
    for expected in ["loop1.gas", "loop10.network_mgmt", "loop11.contracts"] {
        assert!(stub_ids.contains(&expected), "{expected} should be a stub");
    }
    let exec_ids: Vec<&str> = reg
        .iter()
        .filter(|e| e.role == LoopRole::Executable)
        .map(|e| e.loop_id)
        .collect();
    for expected in [
        "loop2.uc",
        "loop2.dispatch",
        "loop2.agc",
        "loop6.microgrid",
        "loop7.evcs",
        "loop9.bes",
        "loop12.ev",
        "loop13.demand",
    ] {
        assert!(
            exec_ids.contains(&expected),
            "{expected} should be executable"
        );
    }
}

/// Config validation reports every problem in one pass.
#[test]
fn config_problems_reported_all_at_once() {
    let cfg = parse_scenario(
        r#"
        [scenario]
        horizon_s = 10.0

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

        [loops.dispatch]
        demand_mw = [1.0]

        [loops.ev]
        base_load_kw = []

        [loops.microgrid]
        load_p = 1.0
        inverter = []
        "#,
    )
    .unwrap();
    let err = run_scenario(&cfg).unwrap_err();
    let text = err.to_string();
    assert!(text.contains("demand_mw"), "{text}");
    assert!(text.contains("base_load_kw"), "{text}");
    assert!(text.contains("inverter"), "{text}");
}

/// Runtime failures abort with the loop id and timestamp.
#[test]
fn runtime_loop_error_names_loop_and_time() {
    let cfg = parse_scenario(
        r#"
        [scenario]
        horizon_s = 10.0

        [loops.microgrid]
        period_s = 5.0
        mode = "islanded"
        load_p = 99.0
        [[loops.microgrid.inverter]]
        id = 0
        droop_mp = 0.05
        droop_mq = 0.05
        p_max = 1.0
        "#,
    )
    .unwrap();
    let err = run_scenario(&cfg).unwrap_err();
    let text = err.to_string();
    assert!(text.contains("loop6.microgrid"), "{text}");
    assert!(text.contains("exceeds aggregate capacity"), "{text}");
}
