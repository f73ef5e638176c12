//! Standard normal distribution functions and the keyed random-stream
//! contract shared by every simulator in the crate.
//!
//! Each Monte Carlo path owns a [`StreamKey`]. The key fixes a ChaCha8 key
//! (from the seed) and a ChaCha stream id (from the path index), so a path
//! draws the same variates whichever thread runs it and in whatever order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `Φ(x)`, the standard normal distribution function.
pub fn normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("normal_cdf: argument {x} is not finite"));
    }
    Ok(0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2))
}

/// `Ψ(x) = 1 - Φ(x)`, evaluated through `erfc` so the upper tail keeps full
/// relative precision until it leaves the normal `f64` range (x ≈ 37.5).
pub fn normal_tail(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("normal_tail: argument {x} is not finite"));
    }
    Ok(0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2))
}

/// `ln Ψ(x)`, finite for every finite `x`. Beyond `x = 30` the tail is
/// taken from the Laplace continued fraction so that ratios of tails far
/// below the `f64` range stay computable.
pub fn log_normal_tail(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("log_normal_tail: argument {x} is not finite"));
    }
    if x < 30.0 {
        return Ok(normal_tail(x)?.ln());
    }
    // Ψ(x) = φ(x) / (x + 1/(x + 2/(x + 3/(x + ...)))).
    let mut acc = x;
    for k in (1..=80).rev() {
        acc = x + k as f64 / acc;
    }
    Ok(-0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln() - acc.ln())
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Identifies one independent stream of variates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub stream_index: u64,
}

impl StreamKey {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    /// A key for an auxiliary stream of the same path (`lane` 0, 1, ...).
    ///
    /// The stream index is kept and the seed is remixed, so lanes of
    /// different paths never collide with each other or with the base keys.
    pub fn lane(&self, lane: u64) -> Self {
        let mixed = splitmix64(self.seed ^ splitmix64(lane.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        Self {
            seed: mixed,
            stream_index: self.stream_index,
        }
    }

    pub fn normals(&self) -> NormalStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        NormalStream { rng }
    }
}

/// Sequential N(0,1) variates for one [`StreamKey`].
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl Iterator for NormalStream {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        Some(self.next_normal())
    }
}

/// The first `n` variates of the stream identified by `key`.
pub fn standard_normals(key: StreamKey, n: usize) -> Vec<f64> {
    key.normals().take(n).collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
