//! Keyed Laplace noise: every released quantity draws from its own stream.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stream tags keep different mechanisms from sharing noise by accident.
pub(crate) const TAG_VECTOR: u64 = 1;
pub(crate) const TAG_INTERVAL: u64 = 2;
pub(crate) const TAG_KMEANS: u64 = 3;

/// Privacy parameters of a single release.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub seed: u64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self { epsilon, seed })
    }

    pub fn noise(&self) -> NoiseSource {
        NoiseSource::new(self.seed)
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("epsilon must be positive and finite, got {epsilon}")))
    }
}

/// Source of Laplace noise keyed by `(seed, key)`.
///
/// The draw for a key never depends on which other keys were drawn or in
/// which order, so releases can be built in parallel. A muted source returns
/// zero noise everywhere and exists for tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSource {
    seed: u64,
    muted: bool,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self { seed, muted: false }
    }

    pub fn muted(seed: u64) -> Self {
        Self { seed, muted: true }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_muted(&self) -> bool {
        self.muted
    }

    /// Independent generator for `key`.
    pub fn stream(&self, key: &[u64]) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(mix(key));
        rng
    }

    /// One Laplace(`scale`) draw for `key`.
    pub fn laplace(&self, key: &[u64], scale: f64) -> Result<f64> {
        if self.muted {
            check_scale(scale)?;
            return Ok(0.0);
        }
        sample_laplace(scale, &mut self.stream(key))
    }
}

fn check_scale(scale: f64) -> Result<()> {
    if scale >= 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("Laplace scale must be finite and non-negative, got {scale}")))
    }
}

/// Zero-mean Laplace variate by inverse CDF from one uniform draw.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    check_scale(scale)?;
    let u: f64 = rng.sample(Open01);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let v = u - 0.5;
    Ok(-scale * v.signum() * (1.0 - 2.0 * v.abs()).ln())
}

/// splitmix64 folded over the key.
pub(crate) fn mix(key: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64 ^ key.len() as u64;
    for &k in key {
        h = splitmix(h ^ k);
    }
    h
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
