//! A state, a list of effects, and the exact acceptance probabilities used
//! to score estimates.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::quantum::{accept_prob, DensityMatrix, Effect};

#[derive(Clone, Debug)]
pub struct Instance {
    pub rho: DensityMatrix,
    pub effects: Vec<Effect>,
    /// `Tr(E_i rho)`; for validation only.
    pub ground_truth: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl Instance {
    pub fn new(rho: DensityMatrix, effects: Vec<Effect>) -> Result<Self> {
        let ground_truth = effects.iter().map(|e| accept_prob(e, &rho)).collect::<Result<_>>()?;
        Ok(Instance {
            rho,
            effects,
            ground_truth,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    /// `max_i |estimates_i - Tr(E_i rho)|`.
    pub fn max_error(&self, estimates: &[f64]) -> Result<f64> {
        if estimates.len() != self.ground_truth.len() {
            return Err(Error::DimensionMismatch {
                expected: self.ground_truth.len(),
                found: estimates.len(),
            });
        }
        Ok(estimates
            .iter()
            .zip(&self.ground_truth)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_truth_matches_accept_prob() {
        let mut rng = crate::rng::from_seed(1);
        let rho = crate::random::density_matrix(&mut rng, 3);
        let effects: Vec<Effect> = (0..4).map(|_| crate::random::effect(&mut rng, 3)).collect();
        let inst = Instance::new(rho.clone(), effects.clone()).unwrap();
        for (e, g) in effects.iter().zip(&inst.ground_truth) {
            assert!((accept_prob(e, &rho).unwrap() - g).abs() < 1e-10);
        }
        assert_eq!(inst.max_error(&inst.ground_truth.clone()).unwrap(), 0.0);
        assert!(inst.max_error(&[0.0]).is_err());
    }
}
