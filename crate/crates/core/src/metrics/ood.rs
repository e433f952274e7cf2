use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dgp::{sample_dataset, GaussianDgp, InterventionPolicy};
use crate::error::{Error, Result};

/// Anything that maps a feature vector to a class.
pub trait Classifier {
    fn predict(&self, x: &[f64]) -> usize;
}

impl<F: Fn(&[f64]) -> usize> Classifier for F {
    fn predict(&self, x: &[f64]) -> usize {
        self(x)
    }
}

/// Monte-Carlo accuracy estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub accuracy: f64,
    pub std_error: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_counts(correct: usize, n: usize) -> Self {
        let p = correct as f64 / n as f64;
        Self {
            accuracy: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        }
    }

    /// Count-weighted merge of independent shards.
    pub fn merge(parts: &[McEstimate]) -> Option<McEstimate> {
        let n: usize = parts.iter().map(|p| p.n).sum();
        if n == 0 {
            return None;
        }
        let correct: f64 = parts.iter().map(|p| p.accuracy * p.n as f64).sum();
        Some(Self::from_counts(correct.round() as usize, n))
    }
}

const CHUNK: usize = 4096;

/// Accuracy of `model` on a fresh sample from the unconfounded distribution.
pub fn ood_risk_mc<C: Classifier + ?Sized, R: Rng + ?Sized>(
    model: &C,
    dgp: &GaussianDgp,
    n_mc: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if n_mc == 0 {
        return Err(Error::InvalidParameter("n_mc must be at least 1".into()));
    }
    let mut correct = 0;
    let mut left = n_mc;
    while left > 0 {
        let take = left.min(CHUNK);
        let batch = sample_dataset(dgp, take, &InterventionPolicy::UniformC, rng)?;
        correct += batch.iter().filter(|e| model.predict(&e.x) == e.y).count();
        left -= take;
    }
    Ok(McEstimate::from_counts(correct, n_mc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::build_default_gaussian_dgp;
    use crate::rng::seeded;

    #[test]
    fn noiseless_invariant_classifier_is_perfect() {
        let mut dgp = build_default_gaussian_dgp(0, 1.0 / 3.0, 60.0).unwrap();
        dgp.sigma = 1e-9;
        let (m0, m1) = (dgp.class_means[0].clone(), dgp.class_means[1].clone());
        let nearest = move |x: &[f64]| {
            let d = |m: &[f64]| m.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            (d(&m1) < d(&m0)) as usize
        };
        let est = ood_risk_mc(&nearest, &dgp, 5_000, &mut seeded(1)).unwrap();
        assert_eq!(est.accuracy, 1.0);
    }

    #[test]
    fn constant_classifier_is_chance() {
        let dgp = build_default_gaussian_dgp(0, 1.0 / 3.0, 60.0).unwrap();
        let est = ood_risk_mc(&|_: &[f64]| 0usize, &dgp, 20_000, &mut seeded(2)).unwrap();
        assert!((est.accuracy - 0.5).abs() < 3.0 * est.std_error);
        assert!(ood_risk_mc(&|_: &[f64]| 0usize, &dgp, 0, &mut seeded(2)).is_err());
    }

    #[test]
    fn merge_is_count_weighted() {
        let a = McEstimate::from_counts(30, 100);
        let b = McEstimate::from_counts(90, 300);
        let m = McEstimate::merge(&[a, b]).unwrap();
        assert_eq!(m.n, 400);
        assert!((m.accuracy - 0.3).abs() < 1e-15);
        assert_eq!(McEstimate::merge(&[b, a]), Some(m));
        assert_eq!(McEstimate::merge(&[]), None);
    }
}
