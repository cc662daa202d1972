//! Watermark generation.
//!
//! The watermark is a private zero-mean Gaussian sequence superimposed on
//! the power setpoints. Samples come from the counter-based generator in
//! [`crate::rng`], so a key reproduces the identical sequence on any
//! platform and any sample is addressable by step index without replaying
//! the stream.

use crate::rng::CounterRng;

/// Default watermark variance, pu^2 (sigma = 2e-3 pu).
pub const DEFAULT_WATERMARK_VARIANCE: f64 = 4e-6;

/// Secret key: the seed pins the sequence, the variance its power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WatermarkKey {
    pub seed: u64,
    pub variance: f64,
}

impl WatermarkKey {
    pub fn new(seed: u64, variance: f64) -> Self {
        Self { seed, variance }
    }

    pub fn enabled(&self) -> bool {
        self.variance > 0.0
    }
}

/// Sample source for a key.
#[derive(Debug, Clone, Copy)]
pub struct WatermarkStream {
    rng: CounterRng,
    sigma: f64,
}

impl WatermarkStream {
    pub fn new(key: &WatermarkKey) -> Self {
        Self {
            rng: CounterRng::for_module(key.seed, "agc.watermark"),
            sigma: key.variance.max(0.0).sqrt(),
        }
    }

    /// The per-area watermark pair injected at control step `step`.
    pub fn sample(&self, step: u64) -> [f64; 2] {
        [
            self.sigma * self.rng.standard_normal(step.wrapping_mul(2)),
            self.sigma
                * self
                    .rng
                    .standard_normal(step.wrapping_mul(2).wrapping_add(1)),
        ]
    }
}
