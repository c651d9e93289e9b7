use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real parameter vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVector(Vec<f64>);

impl ModelVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        match values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(i)),
            None => Ok(ModelVector(values)),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        ModelVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn dist_sq(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

impl AsRef<[f64]> for ModelVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Common amplitude scale agreed for one round.
///
/// Clients report their mean per-element power over an error-free control
/// channel and the server broadcasts `scale = 1 / sqrt(mean power)`. Every
/// client multiplies by the same scale, so the over-the-air sum is the true
/// sum times `scale` and dividing by it afterwards is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationState {
    pub scale: f64,
    pub reported_powers: Vec<f64>,
}

impl NormalizationState {
    pub fn denormalize(&self, value: f64) -> f64 {
        value / self.scale
    }
}

/// Scale all differentials by one common factor so the average symbol power
/// across clients is 1. All-zero input passes through with scale 1.
pub fn normalize(differentials: &[ModelVector]) -> (Vec<Vec<f64>>, NormalizationState) {
    let reported_powers: Vec<f64> = differentials
        .iter()
        .map(|x| if x.dim() == 0 { 0.0 } else { x.norm_sq() / x.dim() as f64 })
        .collect();
    let mean_power = reported_powers.iter().sum::<f64>() / reported_powers.len().max(1) as f64;
    let scale = if mean_power > 0.0 { 1.0 / mean_power.sqrt() } else { 1.0 };
    let scaled = differentials.iter().map(|x| x.as_slice().iter().map(|v| v * scale).collect()).collect();
    (scaled, NormalizationState { scale, reported_powers })
}
