//! Statistical properties of the watermark detector beyond the headline
//! calibration rates.

use gridloop_core::agc::{
    calibration_scenario, simulate, AttackKind, AttackTarget, SensorAttack,
};

/// Alarm rate under bias attacks is non-decreasing in the bias magnitude,
/// checked at three magnitudes across 100 seeds each. The magnitudes
/// straddle the detection knee so the rates actually spread.
#[test]
fn bias_alarm_rate_monotone_in_magnitude() {
    let n = 100u64;
    let mut rates = Vec::new();
    for magnitude in [1e-5, 3e-5, 1e-4] {
        let mut alarms = 0;
        for seed in 0..n {
            let mut cfg = calibration_scenario(seed);
            cfg.attacks.push(SensorAttack {
                kind: AttackKind::Bias,
                magnitude,
                target: AttackTarget::Freq,
                start_s: 25.0,
                end_s: 40.0,
            });
            let out = simulate(&cfg).unwrap();
            if out.final_detection().expect("window evaluated").alarm {
                alarms += 1;
            }
        }
        rates.push(alarms);
    }
    assert!(
        rates[0] <= rates[1] && rates[1] <= rates[2],
        "alarm counts not monotone: {rates:?}"
    );
    assert!(rates[2] > rates[0], "rates should spread across the knee: {rates:?}");
}

/// Scale attacks that shrink the measurements toward zero suppress the
/// watermark signature and trip the correlation test.
#[test]
fn scale_attack_suppressing_signal_is_detected() {
    let mut detected = 0;
    let n = 50u64;
    for seed in 0..n {
        let mut cfg = calibration_scenario(seed);
        cfg.attacks.push(SensorAttack {
            kind: AttackKind::Scale,
            magnitude: 0.05,
            target: AttackTarget::Both,
            start_s: 25.0,
            end_s: 40.0,
        });
        let out = simulate(&cfg).unwrap();
        if out.final_detection().expect("window evaluated").alarm {
            detected += 1;
        }
    }
    assert!(detected * 10 >= 9 * n, "detected {detected}/{n}");
}

/// Attacker noise injection inflates the innovation variance.
#[test]
fn noise_attack_is_detected() {
    let mut detected = 0;
    let n = 50u64;
    for seed in 0..n {
        let mut cfg = calibration_scenario(seed);
        cfg.attacks.push(SensorAttack {
            kind: AttackKind::Noise,
            magnitude: 1e-6,
            target: AttackTarget::Both,
            start_s: 25.0,
            end_s: 40.0,
        });
        let out = simulate(&cfg).unwrap();
        if out.final_detection().expect("window evaluated").alarm {
            detected += 1;
        }
    }
    assert!(detected * 10 >= 9 * n, "detected {detected}/{n}");
}
