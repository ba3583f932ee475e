//! Frozen linear softmax head and the entropy fitness used for adaptation.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::subspace::PrincipalSubspace;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearDecoder {
    weights: Matrix,
    bias: Vec<f64>,
}

/// Output of the decoder for one latent.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub predicted_class: usize,
    /// Shannon entropy of `probabilities` in nats.
    pub entropy: f64,
}

impl LinearDecoder {
    /// `weights` is C×D, `bias` has length C. At least two classes.
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if weights.rows() < 2 {
            return Err(Error::contract(format!(
                "decoder needs at least 2 classes, got {}",
                weights.rows()
            )));
        }
        if bias.len() != weights.rows() {
            return Err(Error::contract(format!(
                "bias length {} does not match {} classes",
                bias.len(),
                weights.rows()
            )));
        }
        if !linalg::all_finite(&bias) {
            return Err(Error::contract("decoder bias has non-finite entries"));
        }
        Ok(Self { weights, bias })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn class_count(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn decode(&self, z: &[f64]) -> Result<Prediction> {
        if z.len() != self.dim() {
            return Err(Error::contract(format!(
                "latent has length {}, decoder expects {}",
                z.len(),
                self.dim()
            )));
        }
        let logits: Vec<f64> = self
            .weights
            .mul_vec(z)?
            .into_iter()
            .zip(&self.bias)
            .map(|(l, b)| l + b)
            .collect();
        Ok(Prediction::from_logits(logits))
    }

    /// Entropy of the decoder output at the corrected latent `z_t + p·Vᵀ`.
    pub fn fitness(
        &self,
        subspace: &PrincipalSubspace,
        z_t: &[f64],
        p: &[f64],
    ) -> Result<(f64, Prediction)> {
        let adapted = subspace.apply_correction(z_t, p)?;
        let prediction = self.decode(&adapted)?;
        Ok((prediction.entropy, prediction))
    }
}

impl Prediction {
    /// Softmax with the max logit subtracted first; entropy uses `0·ln 0 = 0`.
    pub fn from_logits(logits: Vec<f64>) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted: Vec<f64> = logits.iter().map(|l| l - max).collect();
        let exps: Vec<f64> = shifted.iter().map(|s| s.exp()).collect();
        let total: f64 = exps.iter().sum();
        let log_total = total.ln();
        let probabilities: Vec<f64> = exps.iter().map(|e| e / total).collect();

        let mut entropy = 0.0;
        for (p, s) in probabilities.iter().zip(&shifted) {
            if *p > 0.0 {
                entropy -= p * (s - log_total);
            }
        }
        let ceiling = (logits.len() as f64).ln();
        let entropy = entropy.clamp(0.0, ceiling);

        let mut predicted_class = 0;
        for (i, p) in probabilities.iter().enumerate() {
            if *p > probabilities[predicted_class] {
                predicted_class = i;
            }
        }
        Self {
            logits,
            probabilities,
            predicted_class,
            entropy,
        }
    }
}

/// Shannon entropy (nats) of a probability vector.
pub fn entropy(probabilities: &[f64]) -> f64 {
    probabilities
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_decoder_is_uniform() {
        let d = LinearDecoder::new(Matrix::zeros(4, 3), vec![0.0; 4]).unwrap();
        let p = d.decode(&[1.0, -2.0, 3.0]).unwrap();
        for q in &p.probabilities {
            assert!((q - 0.25).abs() < 1e-15);
        }
        assert!((p.entropy - 4f64.ln()).abs() < 1e-12);
        assert_eq!(p.predicted_class, 0);
    }

    #[test]
    fn huge_logits_do_not_overflow() {
        let p = Prediction::from_logits(vec![1000.0, 0.0]);
        assert_eq!(p.probabilities[0], 1.0);
        assert_eq!(p.probabilities[1], 0.0);
        assert_eq!(p.entropy, 0.0);
        assert_eq!(p.predicted_class, 0);
    }

    #[test]
    fn entropy_of_known_distribution() {
        let h = entropy(&[0.7, 0.2, 0.1]);
        assert!((h - 0.80182).abs() < 1e-5, "{h}");
        let logits: Vec<f64> = [0.7f64, 0.2, 0.1].iter().map(|p| p.ln()).collect();
        assert!((Prediction::from_logits(logits).entropy - h).abs() < 1e-12);
    }

    #[test]
    fn one_hot_entropy_is_zero() {
        assert_eq!(entropy(&[0.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn argmax_ties_pick_lowest_index() {
        let p = Prediction::from_logits(vec![1.0, 3.0, 3.0]);
        assert_eq!(p.predicted_class, 1);
    }

    #[test]
    fn decoder_validation() {
        assert!(LinearDecoder::new(Matrix::zeros(1, 3), vec![0.0]).is_err());
        assert!(LinearDecoder::new(Matrix::zeros(2, 3), vec![0.0]).is_err());
        let d = LinearDecoder::new(Matrix::zeros(2, 3), vec![0.0; 2]).unwrap();
        assert!(d.decode(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(logits in proptest::collection::vec(-50.0f64..50.0, 2..12), c in -100.0f64..100.0) {
            let a = Prediction::from_logits(logits.clone());
            let b = Prediction::from_logits(logits.iter().map(|l| l + c).collect());
            for (x, y) in a.probabilities.iter().zip(&b.probabilities) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn prediction_invariants(logits in proptest::collection::vec(-800.0f64..800.0, 2..16)) {
            let p = Prediction::from_logits(logits.clone());
            let sum: f64 = p.probabilities.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(p.probabilities.iter().all(|q| (0.0..=1.0).contains(q)));
            prop_assert!(p.entropy >= 0.0 && p.entropy <= (logits.len() as f64).ln() + 1e-9);
            let best = p.probabilities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(p.probabilities.iter().position(|q| *q == best).unwrap(), p.predicted_class);
        }
    }
}
