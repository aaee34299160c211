//! Log-domain exponential weights.

use serde::{Deserialize, Serialize};

use crate::design::DiscreteDistribution;
use crate::error::{Error, Result};

/// Exponential-weights state over a finite action set.
///
/// Weights are stored as logarithms and shifted so the largest is zero after
/// every update; probabilities are formed by softmax on read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightState {
    log_weights: Vec<f64>,
    round: usize,
}

impl WeightState {
    pub fn uniform(num_actions: usize) -> Result<Self> {
        if num_actions == 0 {
            return Err(Error::Input("weights over an empty action set".into()));
        }
        Ok(Self { log_weights: vec![0.0; num_actions], round: 0 })
    }

    pub fn from_log_weights(log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.is_empty() || log_weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Input("log weights must be finite and nonempty".into()));
        }
        Ok(Self { log_weights, round: 0 })
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        softmax(&self.log_weights)
    }

    pub fn distribution(&self) -> DiscreteDistribution {
        DiscreteDistribution::from_unnormalized(self.probabilities())
            .expect("softmax of finite log weights is a distribution")
    }

    /// `log w_a -= eta * losses[a]`, then advance the round.
    pub fn update(&mut self, eta: f64, losses: &[f64]) -> Result<()> {
        if losses.len() != self.log_weights.len() {
            return Err(Error::DimensionMismatch { expected: self.log_weights.len(), got: losses.len() });
        }
        for (lw, l) in self.log_weights.iter_mut().zip(losses) {
            *lw -= eta * l;
        }
        let top = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::Input("weight update produced a non-finite value".into()));
        }
        for lw in &mut self.log_weights {
            *lw -= top;
        }
        self.round += 1;
        Ok(())
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - top).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_start() {
        let s = WeightState::uniform(4).unwrap();
        assert_eq!(s.probabilities(), vec![0.25; 4]);
        assert!(WeightState::uniform(0).is_err());
    }

    #[test]
    fn huge_exponents_stay_finite() {
        let mut s = WeightState::uniform(3).unwrap();
        for _ in 0..10_000 {
            s.update(10.0, &[100.0, 0.0, 50.0]).unwrap();
        }
        let p = s.probabilities();
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p[1] - 1.0).abs() < 1e-15);
        assert_eq!(s.round(), 10_000);
    }

    #[test]
    fn update_checks_length() {
        let mut s = WeightState::uniform(2).unwrap();
        assert!(s.update(1.0, &[1.0]).is_err());
    }
}
