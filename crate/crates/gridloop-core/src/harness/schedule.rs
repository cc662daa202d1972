//! Activation scheduling.
//!
//! Times are quantized to whole microseconds so coincidence is exact: a
//! 0.02 s loop and a 300 s loop meet at t = 300 s with integer arithmetic,
//! never float accumulation. At a shared instant the faster loop runs
//! first; remaining ties break on the loop id.

use super::HarnessError;

const US_PER_S: f64 = 1e6;

/// Registration data for one loop.
#[derive(Debug, Clone)]
pub struct LoopSpec {
    pub loop_id: String,
    pub period_s: f64,
    pub phase_s: f64,
}

impl LoopSpec {
    pub fn new(loop_id: impl Into<String>, period_s: f64) -> Self {
        Self {
            loop_id: loop_id.into(),
            period_s,
            phase_s: 0.0,
        }
    }
}

/// One scheduled activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Activation {
    pub time_us: u64,
    /// Index into the registration list.
    pub loop_index: usize,
}

impl Activation {
    pub fn time_s(&self) -> f64 {
        self.time_us as f64 / US_PER_S
    }
}

fn to_us(seconds: f64) -> u64 {
    (seconds * US_PER_S).round() as u64
}

/// Expands every loop's activation instants over `[0, horizon]` (inclusive)
/// and orders them by (time, period ascending, loop id).
pub fn schedule(specs: &[LoopSpec], horizon_s: f64) -> Result<Vec<Activation>, HarnessError> {
    let mut problems = Vec::new();
    if horizon_s <= 0.0 {
        problems.push("horizon must be > 0 s".to_string());
    }
    let mut ids: Vec<&str> = specs.iter().map(|s| s.loop_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != specs.len() {
        problems.push("loop ids must be unique".to_string());
    }
    for s in specs {
        if to_us(s.period_s) == 0 {
            problems.push(format!(
                "loop {}: period must be >= 1 microsecond",
                s.loop_id
            ));
        }
        if s.phase_s < 0.0 {
            problems.push(format!("loop {}: phase must be >= 0", s.loop_id));
        }
    }
    if !problems.is_empty() {
        return Err(HarnessError::Config(problems));
    }

    let horizon_us = to_us(horizon_s);
    let mut activations = Vec::new();
    for (idx, s) in specs.iter().enumerate() {
        let period_us = to_us(s.period_s);
        let mut t = to_us(s.phase_s);
        while t <= horizon_us {
            activations.push(Activation {
                time_us: t,
                loop_index: idx,
            });
            t += period_us;
        }
    }
    activations.sort_by(|a, b| {
        let pa = to_us(specs[a.loop_index].period_s);
        let pb = to_us(specs[b.loop_index].period_s);
        (a.time_us, pa, &specs[a.loop_index].loop_id).cmp(&(
            b.time_us,
            pb,
            &specs[b.loop_index].loop_id,
        ))
    });
    Ok(activations)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_loop_inclusive_horizon() {
        let acts = schedule(&[LoopSpec::new("a", 1.0)], 3.0).unwrap();
        let times: Vec<f64> = acts.iter().map(|a| a.time_s()).collect();
        assert_eq!(times, vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn faster_loop_first_at_coincidence() {
        let specs = [LoopSpec::new("slow", 5.0), LoopSpec::new("fast", 1.0)];
        let acts = schedule(&specs, 5.0).unwrap();
        let at5: Vec<&str> = acts
            .iter()
            .filter(|a| a.time_us == 5_000_000)
            .map(|a| specs[a.loop_index].loop_id.as_str())
            .collect();
        assert_eq!(at5, vec!["fast", "slow"]);
    }

    #[test]
    fn agc_and_ed_activation_counts() {
        let specs = [
            LoopSpec::new("loop2.agc", 0.02),
            LoopSpec::new("loop2.dispatch", 300.0),
        ];
        let acts = schedule(&specs, 600.0).unwrap();
        let agc = acts.iter().filter(|a| a.loop_index == 0).count();
        let ed = acts.iter().filter(|a| a.loop_index == 1).count();
        assert_eq!(agc, 30_001);
        assert_eq!(ed, 3);
    }

    #[test]
    fn exact_coincidence_despite_unrepresentable_period() {
        // 0.02 s is not exactly representable in binary; integer microseconds
        // keep 1500 * 0.02 s == 30 s exact
        let specs = [LoopSpec::new("fast", 0.02), LoopSpec::new("slow", 30.0)];
        let acts = schedule(&specs, 30.0).unwrap();
        let at30: Vec<usize> = acts
            .iter()
            .filter(|a| a.time_us == 30_000_000)
            .map(|a| a.loop_index)
            .collect();
        assert_eq!(
            at30,
            vec![0, 1],
            "both activate exactly at 30 s, fast first"
        );
    }

    #[test]
    fn tie_on_period_breaks_lexicographically() {
        let specs = [LoopSpec::new("b", 1.0), LoopSpec::new("a", 1.0)];
        let acts = schedule(&specs, 1.0).unwrap();
        let order: Vec<&str> = acts
            .iter()
            .filter(|a| a.time_us == 0)
            .map(|a| specs[a.loop_index].loop_id.as_str())
            .collect();
        assert_eq!(order, vec!["a", "b"]);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let specs = [LoopSpec::new("x", 1.0), LoopSpec::new("x", 2.0)];
        assert!(matches!(
            schedule(&specs, 1.0),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn phase_offsets_start_later() {
        let mut spec = LoopSpec::new("a", 2.0);
        spec.phase_s = 1.0;
        let acts = schedule(&[spec], 6.0).unwrap();
        let times: Vec<f64> = acts.iter().map(|a| a.time_s()).collect();
        assert_eq!(times, vec![1.0, 3.0, 5.0]);
    }
}
