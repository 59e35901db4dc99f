use super::noise::{check_epsilon, NoiseSource, PrivacyParams, TAG_VECTOR};
use crate::error::{Error, Result};
use crate::sensitivity::SensitivityResult;

/// Adds independent Laplace(`sensitivity / epsilon`) noise to every component.
pub fn laplace_mechanism(truth: &[f64], sensitivity: f64, pp: &PrivacyParams) -> Result<Vec<f64>> {
    laplace_mechanism_with(truth, sensitivity, pp.epsilon, &pp.noise())
}

pub fn laplace_mechanism_with(truth: &[f64], sensitivity: f64, epsilon: f64, noise: &NoiseSource) -> Result<Vec<f64>> {
    check_epsilon(epsilon)?;
    if sensitivity.is_infinite() {
        return Err(Error::InfiniteSensitivity);
    }
    if !(sensitivity >= 0.0) {
        return Err(Error::InvalidParameter(format!("sensitivity must be non-negative, got {sensitivity}")));
    }
    let scale = sensitivity / epsilon;
    truth
        .iter()
        .enumerate()
        .map(|(i, &t)| Ok(t + noise.laplace(&[TAG_VECTOR, i as u64], scale)?))
        .collect()
}

/// Laplace release calibrated by a computed sensitivity.
pub fn laplace_release(truth: &[f64], sensitivity: &SensitivityResult, pp: &PrivacyParams) -> Result<Vec<f64>> {
    if !sensitivity.is_finite() {
        return Err(Error::InfiniteSensitivity);
    }
    laplace_mechanism(truth, sensitivity.value, pp)
}
