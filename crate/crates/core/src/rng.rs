//! Seeded random streams.
//!
//! Every random draw comes from ChaCha20 keyed by the master seed
//! (`seed_from_u64`) with a 64-bit stream id built from a purpose tag and two
//! counters. Normal variates use the Box–Muller transform on 53-bit uniforms,
//! so a stream is fully specified by `(seed, purpose, a, b)` and reproducible
//! in any language with a ChaCha20 implementation.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Stream purpose tags. The value is part of the stream id and must not change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Init = 1,
    TrainBatch = 2,
    Validation = 3,
    Evaluation = 4,
    Test = 5,
}

pub struct SimRng {
    inner: ChaCha20Rng,
    spare: Option<f64>,
}

impl SimRng {
    /// Stream `(purpose, a, b)` of master seed `seed`. `a` keeps its low 24 bits.
    pub fn new(seed: u64, purpose: Purpose, a: u32, b: u32) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        let id = ((purpose as u64) << 56) | ((a as u64 & 0x00FF_FFFF) << 32) | b as u64;
        inner.set_stream(id);
        Self { inner, spare: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn bit(&mut self) -> u8 {
        (self.inner.next_u64() >> 63) as u8
    }

    /// Standard normal variate. Box–Muller pairs are consumed cosine first.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let phi = std::f64::consts::TAU * u2;
        self.spare = Some(r * phi.sin());
        r * phi.cos()
    }
}
