//! BPSK modulation over an AWGN channel.
//!
//! Bit 0 maps to +1 and bit 1 to −1, so a positive LLR favours bit 0.

use crate::rng::SimRng;
use crate::{saturate, Error, Result, LLR_SAT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    ebn0_db: f64,
    rate: f64,
    sigma: f64,
}

impl NoiseSpec {
    /// Noise for a rate-`rate` code at the given Eb/N0:
    /// `σ² = 1 / (2·R·10^(ebn0/10))`.
    pub fn from_ebn0(ebn0_db: f64, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::Config(format!("code rate {rate} outside (0, 1]")));
        }
        if !ebn0_db.is_finite() {
            return Err(Error::Config(format!("Eb/N0 {ebn0_db} dB is not finite")));
        }
        let sigma = sigma_from_ebn0(ebn0_db, rate);
        Ok(Self {
            ebn0_db,
            rate,
            sigma,
        })
    }

    /// Noise at the given Es/N0 (symbol SNR, no rate factor).
    pub fn from_esn0(esn0_db: f64, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::Config(format!("code rate {rate} outside (0, 1]")));
        }
        let sigma = sigma_from_ebn0(esn0_db, 1.0);
        Ok(Self {
            ebn0_db: ebn0_from_sigma(sigma, rate),
            rate,
            sigma,
        })
    }

    pub fn ebn0_db(&self) -> f64 {
        self.ebn0_db
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

pub fn sigma_from_ebn0(ebn0_db: f64, rate: f64) -> f64 {
    (2.0 * rate * 10f64.powf(ebn0_db / 10.0)).powf(-0.5)
}

pub fn ebn0_from_sigma(sigma: f64, rate: f64) -> f64 {
    10.0 * (1.0 / (2.0 * rate * sigma * sigma)).log10()
}

pub fn modulate(bits: &[u8]) -> Vec<f64> {
    bits.iter()
        .map(|&b| if b & 1 == 0 { 1.0 } else { -1.0 })
        .collect()
}

/// `y_j = s_j + σ·g_j` with `g_j` drawn in order from `rng`.
pub fn add_noise(symbols: &[f64], sigma: f64, rng: &mut SimRng) -> Vec<f64> {
    symbols.iter().map(|&s| s + sigma * rng.normal()).collect()
}

/// `2y/σ²`, saturated to `±LLR_SAT`.
pub fn channel_llr(received: &[f64], sigma: f64) -> Vec<f64> {
    let scale = 2.0 / (sigma * sigma);
    received.iter().map(|&y| saturate(scale * y)).collect()
}

/// LLRs of a noiseless transmission: `±LLR_SAT` per codeword bit.
pub fn noiseless_llr(codeword: &[u8]) -> Vec<f64> {
    codeword
        .iter()
        .map(|&b| if b & 1 == 0 { LLR_SAT } else { -LLR_SAT })
        .collect()
}
