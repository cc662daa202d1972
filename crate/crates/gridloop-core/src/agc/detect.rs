//! Watermark presence detection.
//!
//! Over a trailing window two plant replicas free-run from a common anchor:
//! one driven by the commands actually issued (watermark included), one by
//! the same commands with the watermark removed. Their output difference is
//! the watermark's signature on the measured channels. Two statistics are
//! formed against the sensor data:
//!
//! - `correlation_stat`: normalized correlation between the watermark
//!   signature and the measured deviation from the watermark-free replica.
//!   Near 1 when the live plant responds to the watermark; near 0 when the
//!   sensors report data that never saw it (replay).
//! - `variance_stat`: mean squared prediction residual against the full
//!   replica, normalized by its calibrated nominal value. It grows under
//!   bias, scale and noise corruption, and explodes when replayed data
//!   misses a scheduled disturbance.
//!
//! The alarm fires when the correlation falls below its floor or the
//! variance ratio exceeds its cap; both thresholds come from the
//! Monte-Carlo calibration procedure and are committed as fixtures.

use super::{AgcError, AgcSystem, Measurements};

/// Smallest admissible detection window, samples.
pub const MIN_DETECTION_WINDOW: usize = 50;

/// Calibrated detector constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorThresholds {
    /// Alarm when `correlation_stat` drops below this.
    pub corr_min: f64,
    /// Alarm when `variance_stat` rises above this.
    pub var_max: f64,
    /// Nominal mean squared residual dividing the raw variance statistic.
    pub nominal_residual_var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionStatistic {
    pub window: usize,
    pub correlation_stat: f64,
    pub variance_stat: f64,
    pub threshold_corr: f64,
    pub threshold_var: f64,
    pub alarm: bool,
}

/// Everything the detector sees for one window of `W` steps: the anchor
/// state at the window start (measured channels already re-anchored to
/// sensor data, valve/mech from the free-running observer), the `W` issued
/// commands, watermark samples and scheduled load levels, and the `W`
/// sensor readings that followed.
#[derive(Debug)]
pub struct DetectWindow<'a> {
    pub anchor: AgcSystem,
    pub setpoints: &'a [[f64; 2]],
    pub watermarks: &'a [[f64; 2]],
    pub scheduled_load: &'a [[f64; 2]],
    pub measured: &'a [Measurements],
}

fn channels(m: &Measurements) -> [f64; 3] {
    [m.freq_dev[0], m.freq_dev[1], m.tie_flow]
}

/// Runs the two-replica check over one window.
pub fn watermark_detect(
    win: &DetectWindow,
    watermark_variance: f64,
    thresholds: &DetectorThresholds,
) -> Result<DetectionStatistic, AgcError> {
    if watermark_variance <= 0.0 {
        return Err(AgcError::WatermarkDisabled);
    }
    let w = win.measured.len();
    if w < MIN_DETECTION_WINDOW {
        return Err(AgcError::WindowTooShort {
            got: w,
            min: MIN_DETECTION_WINDOW,
        });
    }
    if win.setpoints.len() != w || win.watermarks.len() != w || win.scheduled_load.len() != w {
        return Err(AgcError::InvalidInput(
            "window slices must share one length".to_string(),
        ));
    }

    let mut full = win.anchor.clone();
    let mut free = win.anchor.clone();
    let dt = full.dt;

    let mut dw_sum = 0.0; // <deviation, signature>
    let mut dd_sum = 0.0; // <deviation, deviation>
    let mut ww_sum = 0.0; // <signature, signature>
    let mut resid_sq = 0.0;
    for k in 0..w {
        full.setpoint = win.setpoints[k];
        full.step_dynamics(win.scheduled_load[k], dt);
        free.setpoint = [
            win.setpoints[k][0] - win.watermarks[k][0],
            win.setpoints[k][1] - win.watermarks[k][1],
        ];
        free.step_dynamics(win.scheduled_load[k], dt);

        let y = channels(&win.measured[k]);
        let y_full = channels(&full.measurements());
        let y_free = channels(&free.measurements());
        for ch in 0..3 {
            let signature = y_full[ch] - y_free[ch];
            let deviation = y[ch] - y_free[ch];
            let residual = y[ch] - y_full[ch];
            dw_sum += deviation * signature;
            dd_sum += deviation * deviation;
            ww_sum += signature * signature;
            resid_sq += residual * residual;
        }
    }

    let denom = (dd_sum * ww_sum).sqrt();
    let correlation_stat = if denom > 0.0 {
        dw_sum / denom
    } else if dd_sum == 0.0 && ww_sum > 0.0 {
        0.0 // dead sensors against a live signature
    } else {
        1.0 // nothing to test against; treat as nominal
    };
    let variance_stat = resid_sq / (3.0 * w as f64) / thresholds.nominal_residual_var;
    let alarm = correlation_stat < thresholds.corr_min || variance_stat > thresholds.var_max;
    Ok(DetectionStatistic {
        window: w,
        correlation_stat,
        variance_stat,
        threshold_corr: thresholds.corr_min,
        threshold_var: thresholds.var_max,
        alarm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agc::{WatermarkKey, WatermarkStream};

    fn thresholds() -> DetectorThresholds {
        DetectorThresholds {
            corr_min: 0.2,
            var_max: 10.0,
            nominal_residual_var: 1e-12,
        }
    }

    type WindowData = (
        AgcSystem,
        Vec<[f64; 2]>,
        Vec<[f64; 2]>,
        Vec<[f64; 2]>,
        Vec<Measurements>,
    );

    /// Simulates the closed loop and returns (anchor, setpoints, watermarks,
    /// loads, true measurements).
    fn run_window(w: usize, wm_on: bool) -> WindowData {
        let key = WatermarkKey::new(5, 4e-6);
        let stream = WatermarkStream::new(&key);
        let mut sys = AgcSystem::default();
        let anchor = sys.clone();
        let mut setpoints = Vec::new();
        let mut wms = Vec::new();
        let mut loads = Vec::new();
        let mut meas = Vec::new();
        for k in 0..w {
            let m = sys.measurements();
            let wm = if wm_on {
                stream.sample(k as u64)
            } else {
                [0.0, 0.0]
            };
            sys.control_step(m, wm);
            sys.step_dynamics([0.0, 0.0], sys.dt);
            setpoints.push(sys.setpoint);
            wms.push(wm);
            loads.push([0.0, 0.0]);
            meas.push(sys.measurements());
        }
        (anchor, setpoints, wms, loads, meas)
    }

    #[test]
    fn live_plant_shows_full_correlation() {
        let (anchor, sp, wm, ld, meas) = run_window(400, true);
        let win = DetectWindow {
            anchor,
            setpoints: &sp,
            watermarks: &wm,
            scheduled_load: &ld,
            measured: &meas,
        };
        let stat = watermark_detect(&win, 4e-6, &thresholds()).unwrap();
        assert!(
            stat.correlation_stat > 0.999,
            "noise-free live plant: corr {}",
            stat.correlation_stat
        );
        assert!(!stat.alarm);
    }

    #[test]
    fn perfect_watermark_free_replay_zeroes_correlation_and_alarms() {
        // measurements replaced by model-propagated values that never saw
        // the watermark: the detector must see a vanishing correlation
        let (anchor, sp, wm, ld, _) = run_window(400, true);
        let mut free = anchor.clone();
        let mut fake = Vec::new();
        for k in 0..sp.len() {
            free.setpoint = [sp[k][0] - wm[k][0], sp[k][1] - wm[k][1]];
            free.step_dynamics(ld[k], free.dt);
            fake.push(free.measurements());
        }
        let win = DetectWindow {
            anchor,
            setpoints: &sp,
            watermarks: &wm,
            scheduled_load: &ld,
            measured: &fake,
        };
        let stat = watermark_detect(&win, 4e-6, &thresholds()).unwrap();
        assert!(
            stat.correlation_stat.abs() < 1e-6,
            "corr {} should collapse",
            stat.correlation_stat
        );
        assert!(stat.alarm, "calibrated thresholds must flag the replay");
    }

    #[test]
    fn short_window_is_rejected() {
        let (anchor, sp, wm, ld, meas) = run_window(10, true);
        let win = DetectWindow {
            anchor,
            setpoints: &sp,
            watermarks: &wm,
            scheduled_load: &ld,
            measured: &meas,
        };
        match watermark_detect(&win, 4e-6, &thresholds()) {
            Err(AgcError::WindowTooShort { got: 10, min }) => {
                assert_eq!(min, MIN_DETECTION_WINDOW)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn disabled_watermark_is_rejected() {
        let (anchor, sp, wm, ld, meas) = run_window(100, false);
        let win = DetectWindow {
            anchor,
            setpoints: &sp,
            watermarks: &wm,
            scheduled_load: &ld,
            measured: &meas,
        };
        match watermark_detect(&win, 0.0, &thresholds()) {
            Err(AgcError::WatermarkDisabled) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
