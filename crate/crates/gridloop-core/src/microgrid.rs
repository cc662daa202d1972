//! Quasi-steady-state hierarchical control of a droop-based AC microgrid.
//!
//! Device-level dynamics are out of scope; what is modelled is the algebra
//! of the hierarchy. Primary droop shares real power inversely to the droop
//! gains around a common steady-state frequency. Secondary control shifts
//! the frequency offsets uniformly (preserving the sharing ratios) and tunes
//! per-inverter voltage offsets toward critical-node targets. Tertiary
//! control retunes the power setpoints so the point-of-common-coupling
//! exchange hits a target while grid-connected.
//!
//! The reactive side uses per-inverter local V droop with inverse-gain
//! sharing of the reactive load and no network coupling.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MicrogridError {
    #[error("load {load} pu exceeds aggregate capacity {capacity} pu")]
    CapacityExceeded { load: f64, capacity: f64 },
    #[error("inverter {inverter}: voltage target needs offset {required:.4} pu beyond limit {limit:.4} pu")]
    TargetUnreachable {
        inverter: usize,
        required: f64,
        limit: f64,
    },
    #[error("pcc target requires total output {required} pu outside [0, {capacity}] pu")]
    PccTargetInfeasible { required: f64, capacity: f64 },
    #[error("operation requires {0} mode")]
    WrongMode(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Grid-forming inverter under P-f / Q-V droop.
#[derive(Debug, Clone)]
pub struct DroopInverter {
    pub id: usize,
    /// Frequency droop gain, Hz per pu real power.
    pub droop_mp: f64,
    /// Voltage droop gain, pu volts per pu reactive power.
    pub droop_mq: f64,
    /// Nominal frequency setpoint, Hz.
    pub nominal_freq: f64,
    /// Nominal voltage setpoint, pu.
    pub nominal_volt: f64,
    /// Real power setpoint, pu.
    pub p_setpoint: f64,
    /// Reactive power setpoint, pu.
    pub q_setpoint: f64,
    /// Secondary frequency offset, Hz.
    pub freq_offset: f64,
    /// Secondary voltage offset, pu.
    pub volt_offset: f64,
    /// Real power capacity, pu.
    pub p_max: f64,
    /// Secondary voltage offset authority, pu.
    pub volt_offset_max: f64,
}

impl DroopInverter {
    pub fn new(id: usize, droop_mp: f64, droop_mq: f64, p_max: f64) -> Self {
        Self {
            id,
            droop_mp,
            droop_mq,
            nominal_freq: 60.0,
            nominal_volt: 1.0,
            p_setpoint: 0.0,
            q_setpoint: 0.0,
            freq_offset: 0.0,
            volt_offset: 0.0,
            p_max,
            volt_offset_max: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    Islanded,
    GridConnected,
}

#[derive(Debug, Clone)]
pub struct MicrogridState {
    pub inverters: Vec<DroopInverter>,
    /// Total real load, pu.
    pub load_p: f64,
    /// Total reactive load, pu.
    pub load_q: f64,
    pub mode: GridMode,
}

impl MicrogridState {
    fn validate(&self) -> Result<(), MicrogridError> {
        if self.inverters.is_empty() {
            return Err(MicrogridError::InvalidInput("no inverters".to_string()));
        }
        for inv in &self.inverters {
            if inv.droop_mp <= 0.0 || inv.droop_mq <= 0.0 {
                return Err(MicrogridError::InvalidInput(format!(
                    "inverter {}: droop gains must be > 0",
                    inv.id
                )));
            }
        }
        let f0 = self.inverters[0].nominal_freq;
        if self
            .inverters
            .iter()
            .any(|i| (i.nominal_freq - f0).abs() > 1e-12)
        {
            return Err(MicrogridError::InvalidInput(
                "all inverters must share one nominal frequency".to_string(),
            ));
        }
        Ok(())
    }

    fn nominal_freq(&self) -> f64 {
        self.inverters[0].nominal_freq
    }
}

/// Solved operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Per-inverter real power, pu.
    pub p: Vec<f64>,
    /// Per-inverter reactive power, pu.
    pub q: Vec<f64>,
    /// Common system frequency, Hz.
    pub frequency: f64,
    /// Per-inverter terminal voltage, pu.
    pub voltages: Vec<f64>,
    /// Real power exported to the host grid, pu (zero when islanded).
    pub pcc_flow: f64,
}

/// Islanded steady state: common frequency from
/// `w = w* + dw_i - mp_i (P_i - P*_i)` jointly with `sum P_i = load`.
pub fn droop_steady_state(state: &MicrogridState) -> Result<SteadyState, MicrogridError> {
    state.validate()?;
    if state.mode != GridMode::Islanded {
        return Err(MicrogridError::WrongMode("islanded"));
    }
    let capacity: f64 = state.inverters.iter().map(|i| i.p_max).sum();
    if state.load_p > capacity {
        return Err(MicrogridError::CapacityExceeded {
            load: state.load_p,
            capacity,
        });
    }

    let inv_mp_sum: f64 = state.inverters.iter().map(|i| 1.0 / i.droop_mp).sum();
    let weighted: f64 = state
        .inverters
        .iter()
        .map(|i| (i.nominal_freq + i.freq_offset) / i.droop_mp)
        .sum();
    let p_set_sum: f64 = state.inverters.iter().map(|i| i.p_setpoint).sum();
    let frequency = (weighted + p_set_sum - state.load_p) / inv_mp_sum;

    let p: Vec<f64> = state
        .inverters
        .iter()
        .map(|i| i.p_setpoint + (i.nominal_freq + i.freq_offset - frequency) / i.droop_mp)
        .collect();

    // reactive load shared inversely to the voltage droop gains
    let inv_mq_sum: f64 = state.inverters.iter().map(|i| 1.0 / i.droop_mq).sum();
    let q_set_sum: f64 = state.inverters.iter().map(|i| i.q_setpoint).sum();
    let q_imbalance = state.load_q - q_set_sum;
    let q: Vec<f64> = state
        .inverters
        .iter()
        .map(|i| i.q_setpoint + q_imbalance * (1.0 / i.droop_mq) / inv_mq_sum)
        .collect();
    let voltages: Vec<f64> = state
        .inverters
        .iter()
        .zip(&q)
        .map(|(i, &qi)| i.nominal_volt + i.volt_offset - i.droop_mq * (qi - i.q_setpoint))
        .collect();

    Ok(SteadyState {
        p,
        q,
        frequency,
        voltages,
        pcc_flow: 0.0,
    })
}

/// Grid-connected steady state: the host grid pins frequency at nominal, so
/// each inverter holds `P* + dw/mp` and the PCC absorbs the balance.
pub fn grid_connected_steady_state(state: &MicrogridState) -> Result<SteadyState, MicrogridError> {
    state.validate()?;
    if state.mode != GridMode::GridConnected {
        return Err(MicrogridError::WrongMode("grid-connected"));
    }
    let p: Vec<f64> = state
        .inverters
        .iter()
        .map(|i| i.p_setpoint + i.freq_offset / i.droop_mp)
        .collect();
    let q: Vec<f64> = state.inverters.iter().map(|i| i.q_setpoint).collect();
    let voltages: Vec<f64> = state
        .inverters
        .iter()
        .map(|i| i.nominal_volt + i.volt_offset)
        .collect();
    let pcc_flow = p.iter().sum::<f64>() - state.load_p;
    Ok(SteadyState {
        p,
        q,
        frequency: state.nominal_freq(),
        voltages,
        pcc_flow,
    })
}

/// Voltage target for a critical node, identified by the inverter index
/// whose terminal it is.
#[derive(Debug, Clone, Copy)]
pub struct VoltageTarget {
    pub inverter: usize,
    pub v_target: f64,
}

/// Secondary offsets to apply: a uniform frequency shift (preserving power
/// sharing) and per-inverter voltage offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondaryOffsets {
    pub freq: Vec<f64>,
    pub volt: Vec<f64>,
}

impl SecondaryOffsets {
    pub fn apply(&self, state: &mut MicrogridState) {
        for (inv, (&f, &v)) in state
            .inverters
            .iter_mut()
            .zip(self.freq.iter().zip(&self.volt))
        {
            inv.freq_offset = f;
            inv.volt_offset = v;
        }
    }
}

const RESTORE_TOL: f64 = 1e-6;
const RESTORE_MAX_ITERS: usize = 200;

/// Integral restoration: shifts all frequency offsets uniformly until the
/// common frequency equals nominal, and walks targeted voltage offsets until
/// the critical-node voltages meet their targets, both within 1e-6.
pub fn secondary_restore(
    state: &MicrogridState,
    targets: &[VoltageTarget],
) -> Result<SecondaryOffsets, MicrogridError> {
    for t in targets {
        if t.inverter >= state.inverters.len() {
            return Err(MicrogridError::InvalidInput(format!(
                "voltage target references inverter {} of {}",
                t.inverter,
                state.inverters.len()
            )));
        }
    }
    let mut trial = state.clone();
    let nominal = {
        trial.validate()?;
        trial.nominal_freq()
    };
    for _ in 0..RESTORE_MAX_ITERS {
        let ss = droop_steady_state(&trial)?;
        let freq_err = nominal - ss.frequency;
        let mut worst_v = 0.0f64;
        for t in targets {
            let v_err = t.v_target - ss.voltages[t.inverter];
            worst_v = worst_v.max(v_err.abs());
        }
        if freq_err.abs() < RESTORE_TOL && worst_v < RESTORE_TOL {
            break;
        }
        for inv in trial.inverters.iter_mut() {
            inv.freq_offset += freq_err;
        }
        for t in targets {
            let ss_v = ss.voltages[t.inverter];
            trial.inverters[t.inverter].volt_offset += t.v_target - ss_v;
        }
    }
    let ss = droop_steady_state(&trial)?;
    if (ss.frequency - nominal).abs() >= RESTORE_TOL {
        return Err(MicrogridError::InvalidInput(
            "secondary restoration did not converge".to_string(),
        ));
    }
    for (idx, inv) in trial.inverters.iter().enumerate() {
        if inv.volt_offset.abs() > inv.volt_offset_max + 1e-12 {
            return Err(MicrogridError::TargetUnreachable {
                inverter: idx,
                required: inv.volt_offset,
                limit: inv.volt_offset_max,
            });
        }
    }
    Ok(SecondaryOffsets {
        freq: trial.inverters.iter().map(|i| i.freq_offset).collect(),
        volt: trial.inverters.iter().map(|i| i.volt_offset).collect(),
    })
}

/// Tertiary control: new real power setpoints making the steady-state PCC
/// exchange equal `pcc_target` (export positive), allocated proportional to
/// inverter capacity.
pub fn tertiary_setpoint(
    state: &MicrogridState,
    pcc_target: f64,
) -> Result<Vec<f64>, MicrogridError> {
    state.validate()?;
    if state.mode != GridMode::GridConnected {
        return Err(MicrogridError::WrongMode("grid-connected"));
    }
    let capacity: f64 = state.inverters.iter().map(|i| i.p_max).sum();
    let required = state.load_p + pcc_target;
    if required < -1e-12 || required > capacity + 1e-12 {
        return Err(MicrogridError::PccTargetInfeasible { required, capacity });
    }
    Ok(state
        .inverters
        .iter()
        .map(|i| i.p_max / capacity * required - i.freq_offset / i.droop_mp)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_equal(load: f64) -> MicrogridState {
        MicrogridState {
            inverters: vec![
                DroopInverter::new(0, 0.05, 0.05, 2.0),
                DroopInverter::new(1, 0.05, 0.05, 2.0),
            ],
            load_p: load,
            load_q: 0.0,
            mode: GridMode::Islanded,
        }
    }

    #[test]
    fn equal_droops_split_evenly() {
        let state = two_equal(1.0);
        let ss = droop_steady_state(&state).unwrap();
        assert!((ss.p[0] - 0.5).abs() < 1e-12);
        assert!((ss.p[1] - 0.5).abs() < 1e-12);
        assert!((ss.frequency - (60.0 - 0.05 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn zero_load_nominal_frequency() {
        let ss = droop_steady_state(&two_equal(0.0)).unwrap();
        assert_eq!(ss.frequency, 60.0);
        assert!(ss.p.iter().all(|&p| p.abs() < 1e-15));
    }

    #[test]
    fn sharing_inverse_to_gains() {
        let mut state = two_equal(0.9);
        state.inverters[0].droop_mp = 0.04;
        state.inverters[1].droop_mp = 0.08; // gain ratio 1:2
        let ss = droop_steady_state(&state).unwrap();
        assert!((ss.p[0] / ss.p[1] - 2.0).abs() < 1e-9, "share ratio 2:1");
        assert!((ss.p[0] + ss.p[1] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn overload_is_an_error() {
        let err = droop_steady_state(&two_equal(5.0)).unwrap_err();
        assert!(matches!(err, MicrogridError::CapacityExceeded { .. }));
    }

    #[test]
    fn reactive_share_and_voltage_droop() {
        let mut state = two_equal(1.0);
        state.load_q = 0.4;
        state.inverters[0].droop_mq = 0.02;
        state.inverters[1].droop_mq = 0.04;
        let ss = droop_steady_state(&state).unwrap();
        assert!((ss.q[0] / ss.q[1] - 2.0).abs() < 1e-9);
        for (i, inv) in state.inverters.iter().enumerate() {
            let expected = 1.0 - inv.droop_mq * ss.q[i];
            assert!((ss.voltages[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn restore_shifts_frequency_uniformly() {
        let state = two_equal(1.2);
        let before = droop_steady_state(&state).unwrap();
        let deficit = 60.0 - before.frequency;
        assert!(deficit > 0.0);
        let offsets = secondary_restore(&state, &[]).unwrap();
        for f in &offsets.freq {
            assert!((f - deficit).abs() < 1e-9, "uniform shift by the deficit");
        }
        let mut restored = state.clone();
        offsets.apply(&mut restored);
        let after = droop_steady_state(&restored).unwrap();
        assert!((after.frequency - 60.0).abs() < 1e-6);
        // sharing preserved
        assert!((after.p[0] / after.p[1] - before.p[0] / before.p[1]).abs() < 1e-6);
    }

    #[test]
    fn restore_is_fixed_point_when_already_met() {
        let mut state = two_equal(1.0);
        let offsets = secondary_restore(&state, &[]).unwrap();
        offsets.apply(&mut state);
        let again = secondary_restore(&state, &[]).unwrap();
        for (a, b) in offsets.freq.iter().zip(&again.freq) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn three_inverter_restore_matches_direct_solve() {
        let mut state = MicrogridState {
            inverters: vec![
                DroopInverter::new(0, 0.04, 0.02, 2.0),
                DroopInverter::new(1, 0.05, 0.03, 2.0),
                DroopInverter::new(2, 0.10, 0.05, 2.0),
            ],
            load_p: 1.5,
            load_q: 0.3,
            mode: GridMode::Islanded,
        };
        state.inverters[1].volt_offset_max = 0.2;
        let targets = [
            VoltageTarget {
                inverter: 0,
                v_target: 1.0,
            },
            VoltageTarget {
                inverter: 1,
                v_target: 1.01,
            },
        ];
        let offsets = secondary_restore(&state, &targets).unwrap();

        // direct solve oracle: uniform freq offset = nominal - droop freq;
        // voltage offsets = target - (V* - mq (Q_i - Q*_i)) with the Q share
        // independent of offsets
        let inv_mp: f64 = state.inverters.iter().map(|i| 1.0 / i.droop_mp).sum();
        let w: f64 = state.inverters.iter().map(|i| 60.0 / i.droop_mp).sum();
        let f_droop = (w - state.load_p) / inv_mp;
        let du = 60.0 - f_droop;
        let inv_mq: f64 = state.inverters.iter().map(|i| 1.0 / i.droop_mq).sum();
        for (i, t) in targets.iter().enumerate() {
            let inv = &state.inverters[t.inverter];
            let q_i = state.load_q * (1.0 / inv.droop_mq) / inv_mq;
            let dv = t.v_target - (1.0 - inv.droop_mq * q_i);
            assert!(
                (offsets.volt[t.inverter] - dv).abs() < 1e-8,
                "target {i}: {} vs {}",
                offsets.volt[t.inverter],
                dv
            );
        }
        for f in &offsets.freq {
            assert!((f - du).abs() < 1e-8);
        }

        let mut restored = state.clone();
        offsets.apply(&mut restored);
        let ss = droop_steady_state(&restored).unwrap();
        assert!((ss.frequency - 60.0).abs() < 1e-6);
        assert!((ss.voltages[0] - 1.0).abs() < 1e-6);
        assert!((ss.voltages[1] - 1.01).abs() < 1e-6);
    }

    #[test]
    fn unreachable_voltage_target_errors() {
        let mut state = two_equal(1.0);
        state.inverters[0].volt_offset_max = 0.05;
        let err = secondary_restore(
            &state,
            &[VoltageTarget {
                inverter: 0,
                v_target: 1.2,
            }],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            MicrogridError::TargetUnreachable { inverter: 0, .. }
        ));
    }

    #[test]
    fn tertiary_fixed_point_and_balance() {
        let mut state = two_equal(1.0);
        state.mode = GridMode::GridConnected;
        state.inverters[0].p_setpoint = 0.6;
        state.inverters[1].p_setpoint = 0.4;
        let current = grid_connected_steady_state(&state).unwrap();
        assert!((current.pcc_flow - 0.0).abs() < 1e-12);

        // fixed point: targeting the current flow keeps total output
        let p_new = tertiary_setpoint(&state, current.pcc_flow).unwrap();
        assert!((p_new.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        // self-supply: pcc 0 means total output equals load
        let p_self = tertiary_setpoint(&state, 0.0).unwrap();
        assert!((p_self.iter().sum::<f64>() - state.load_p).abs() < 1e-12);
    }

    #[test]
    fn tertiary_hits_target_in_recomputed_steady_state() {
        let mut state = two_equal(1.0);
        state.mode = GridMode::GridConnected;
        let p_new = tertiary_setpoint(&state, 0.5).unwrap();
        for (inv, &p) in state.inverters.iter_mut().zip(&p_new) {
            inv.p_setpoint = p;
        }
        let ss = grid_connected_steady_state(&state).unwrap();
        assert!((ss.pcc_flow - 0.5).abs() < 1e-6);
        // allocation proportional to capacity (equal here)
        assert!((ss.p[0] - ss.p[1]).abs() < 1e-12);
    }

    #[test]
    fn tertiary_rejects_infeasible_target() {
        let mut state = two_equal(1.0);
        state.mode = GridMode::GridConnected;
        let err = tertiary_setpoint(&state, 10.0).unwrap_err();
        assert!(matches!(err, MicrogridError::PccTargetInfeasible { .. }));
    }

    #[test]
    fn islanding_transition_bounded_deviation() {
        // balanced while connected, then islanded: frequency deviation stays
        // within mp_max * load
        let mut state = two_equal(1.0);
        state.mode = GridMode::GridConnected;
        let p_new = tertiary_setpoint(&state, 0.0).unwrap();
        for (inv, &p) in state.inverters.iter_mut().zip(&p_new) {
            inv.p_setpoint = p;
        }
        state.mode = GridMode::Islanded;
        let ss = droop_steady_state(&state).unwrap();
        let mp_max = state
            .inverters
            .iter()
            .map(|i| i.droop_mp)
            .fold(0.0, f64::max);
        assert!((ss.frequency - 60.0).abs() <= mp_max * state.load_p + 1e-12);
    }

    #[test]
    fn steady_state_solver_is_pure_and_repeatable() {
        let state = two_equal(1.3);
        let a = droop_steady_state(&state).unwrap();
        let b = droop_steady_state(&state).unwrap();
        assert_eq!(a, b);
    }
}
