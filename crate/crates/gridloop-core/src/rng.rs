//! Deterministic counter-based random streams.
//!
//! Randomness is centralized: each stochastic component draws from its own
//! stream keyed by `(scenario seed, module name)`, so enabling, disabling or
//! reordering modules never perturbs another module's draws. A draw is a pure
//! function of `(key, counter)` — sequences allow random access and replay
//! without mutable state.
//!
//! Gaussian samples use the Box–Muller transform with a documented rounding
//! chain: the 64-bit word `x` maps to a uniform in `(0, 1]` via
//! `((x >> 11) + 1) * 2^-53`, and `ln`/`cos` are evaluated with the software
//! implementations from the `libm` crate, which are bit-stable across
//! platforms (hardware `sqrt` is IEEE-exact everywhere).

use std::f64::consts::PI;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output mix.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a hash of a module name, used for key derivation.
fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// A stateless random stream: word `i` is `mix(key + i * GOLDEN)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        Self { key: mix(key) }
    }

    /// Stream for `module` under a scenario seed. Distinct module names give
    /// statistically independent streams for the same seed.
    pub fn for_module(seed: u64, module: &str) -> Self {
        Self::new(seed ^ fnv1a(module).wrapping_mul(GOLDEN))
    }

    #[inline]
    pub fn word(&self, counter: u64) -> u64 {
        mix(self.key.wrapping_add(counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform draw in `(0, 1]`.
    #[inline]
    pub fn uniform_open01(&self, counter: u64) -> f64 {
        ((self.word(counter) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform_range(&self, counter: u64, lo: f64, hi: f64) -> f64 {
        let u = (self.word(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        lo + u * (hi - lo)
    }

    /// Standard normal sample `index`, consuming counters `2*index` and
    /// `2*index + 1`.
    pub fn standard_normal(&self, index: u64) -> f64 {
        let u1 = self.uniform_open01(index.wrapping_mul(2));
        let u2 = self.uniform_open01(index.wrapping_mul(2).wrapping_add(1));
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
    }
}

/// Sequential cursor over a [`CounterRng`] for callers that only need
/// "next draw" semantics.
#[derive(Debug, Clone)]
pub struct StreamCursor {
    rng: CounterRng,
    next: u64,
}

impl StreamCursor {
    pub fn new(rng: CounterRng) -> Self {
        Self { rng, next: 0 }
    }

    pub fn next_normal(&mut self) -> f64 {
        let i = self.next;
        self.next += 1;
        self.rng.standard_normal(i)
    }

    pub fn next_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let i = self.next;
        self.next += 1;
        // offset keeps uniform draws off the normal sample counters
        self.rng
            .uniform_range(i.wrapping_mul(2).wrapping_add(1 << 62), lo, hi)
    }
}
