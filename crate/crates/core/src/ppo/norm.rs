//! Frozen observation normalization.
//!
//! Statistics come from the training window once, before any training, and
//! never update afterwards. Evaluation therefore sees the exact transform
//! training saw, and a checkpoint fully reproduces behavior.

use crate::env::{Observation, OBS_DIM};
use crate::error::{Error, Result};
use crate::rolling;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ObsNormalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ObsNormalizer {
    /// Pass-through transform.
    pub fn identity() -> ObsNormalizer {
        ObsNormalizer {
            mean: vec![0.0; OBS_DIM],
            std: vec![1.0; OBS_DIM],
        }
    }

    /// Per-dimension mean and sample standard deviation. A constant
    /// dimension keeps its mean and gets unit scale, so it maps to zero
    /// instead of blowing up or passing a huge raw level through.
    pub fn fit(observations: &[Observation]) -> Result<ObsNormalizer> {
        if observations.len() < 2 {
            return Err(Error::Invalid(format!(
                "normalizer needs at least 2 observations, got {}",
                observations.len()
            )));
        }
        let mut mean = vec![0.0; OBS_DIM];
        let mut std = vec![1.0; OBS_DIM];
        for d in 0..OBS_DIM {
            let column: Vec<f64> = observations.iter().map(|o| o[d]).collect();
            if column.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "observation dimension {d} contains a non-finite value"
                )));
            }
            mean[d] = rolling::mean(&column);
            let s = rolling::sample_std(&column);
            std[d] = if s > 0.0 { s } else { 1.0 };
        }
        Ok(ObsNormalizer { mean, std })
    }

    pub fn apply(&self, obs: &Observation) -> Observation {
        let mut out = [0.0; OBS_DIM];
        for d in 0..OBS_DIM {
            out[d] = (obs[d] - self.mean[d]) / self.std[d];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transformed_stats_are_standard() {
        let obs: Vec<Observation> = (0..50)
            .map(|i| {
                let x = i as f64;
                [
                    x,
                    2.0 * x + 1.0,
                    (x * 0.3).sin(),
                    x * x,
                    1000.0 + x,
                    0.0,
                    if i % 2 == 0 { 1.0 } else { 0.0 },
                    0.01 + 0.001 * x,
                ]
            })
            .collect();
        let norm = ObsNormalizer::fit(&obs).unwrap();
        let transformed: Vec<Observation> = obs.iter().map(|o| norm.apply(o)).collect();
        for d in 0..OBS_DIM {
            let col: Vec<f64> = transformed.iter().map(|o| o[d]).collect();
            let m = rolling::mean(&col);
            assert!(m.abs() < 1e-9, "dim {d} mean {m}");
            if d != 5 {
                let s = rolling::sample_std(&col);
                assert!((s - 1.0).abs() < 1e-9, "dim {d} std {s}");
            }
        }
    }

    #[test]
    fn constant_dimension_maps_to_zero() {
        let obs: Vec<Observation> = (0..10)
            .map(|i| [5.0, i as f64, 0.0, 1.0, 2.0, 0.0, 1.0, 0.5])
            .collect();
        let norm = ObsNormalizer::fit(&obs).unwrap();
        let t = norm.apply(&obs[3]);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[6], 0.0);
        // previous-position slot passes through unscaled
        let probe = norm.apply(&[5.0, 0.0, 0.0, 1.0, 2.0, 0.7, 1.0, 0.5]);
        assert!((probe[5] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn identity_is_a_no_op() {
        let norm = ObsNormalizer::identity();
        let obs = [1.0, -2.0, 3.0, 4.0, 5.0, 0.5, 1.0, 0.02];
        assert_eq!(norm.apply(&obs), obs);
    }
}
