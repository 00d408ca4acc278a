//! Reproducible random numbers.
//!
//! The generator is ChaCha20 (a counter-based block function) seeded with
//! `SeedableRng::seed_from_u64`, and optionally moved to a separate 64-bit
//! stream id so that independent consumers (initialization, per-epoch
//! resampling, Monte Carlo kernels) never share output blocks.
//!
//! Uniforms take the top 53 bits of one 64-bit output: `u = (w >> 11) * 2^-53`,
//! giving `u ∈ [0, 1)`. Normals use the basic Box–Muller transform on two
//! uniforms, `sqrt(-2 ln(1 - u1)) * (cos, sin)(2π u2)`; both outputs are used, the
//! cosine branch first. None of this depends on platform or thread count.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Clone, Debug)]
pub struct Rng {
    inner: ChaCha20Rng,
    spare: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner, spare: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Stream ids reserved for the toolkit's consumers.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const SAMPLING: u64 = 2;
    pub const THEORY: u64 = 3;
    pub const CHECKS: u64 = 4;
    /// Per-epoch resampling uses `EPOCH_BASE + epoch`.
    pub const EPOCH_BASE: u64 = 1 << 32;
}
