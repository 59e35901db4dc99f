use serde::{Deserialize, Serialize};

use super::isotonic::{isotonic_inference, isotonic_inference_nonneg};
use super::noise::{check_epsilon, NoiseSource, PrivacyParams, TAG_INTERVAL};
use super::PrefixRelease;
use crate::domain::Histogram;
use crate::error::{Error, Result};

/// Noisy cumulative histogram and its monotone post-processed version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleasedCumulative {
    pub theta: u64,
    pub epsilon: f64,
    pub seed: u64,
    pub clamped: bool,
    pub noisy: Vec<f64>,
    pub inferred: Vec<f64>,
}

impl PrefixRelease for ReleasedCumulative {
    fn prefixes(&self) -> &[f64] {
        &self.inferred
    }
}

/// Prefix counts plus Laplace(`theta / epsilon`) noise, followed by isotonic
/// inference clamped at zero.
pub fn ordered_mechanism(h: &Histogram, theta: u64, pp: &PrivacyParams) -> Result<ReleasedCumulative> {
    ordered_mechanism_with(h, theta, pp.epsilon, &pp.noise(), true)
}

pub fn ordered_mechanism_with(
    h: &Histogram,
    theta: u64,
    epsilon: f64,
    noise: &NoiseSource,
    clamp: bool,
) -> Result<ReleasedCumulative> {
    check_epsilon(epsilon)?;
    if theta == 0 {
        return Err(Error::InvalidParameter("theta must be at least 1".into()));
    }
    if h.is_empty() {
        return Err(Error::InvalidParameter("empty histogram".into()));
    }
    let scale = theta as f64 / epsilon;
    let truth = h.cumulative().to_f64();
    let noisy = truth
        .iter()
        .enumerate()
        .map(|(i, &t)| Ok(t + noise.laplace(&[TAG_INTERVAL, 1, i as u64 + 1], scale)?))
        .collect::<Result<Vec<f64>>>()?;
    let inferred = if clamp {
        isotonic_inference_nonneg(&noisy)
    } else {
        isotonic_inference(&noisy)
    };
    Ok(ReleasedCumulative {
        theta,
        epsilon,
        seed: noise.seed(),
        clamped: clamp,
        noisy,
        inferred,
    })
}
