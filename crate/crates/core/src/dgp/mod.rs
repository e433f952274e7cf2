//! Data-generating processes: the Gaussian synthetic study, its interventions
//! on the attribute mechanism, and a small discrete model that can be
//! enumerated exactly.

mod discrete;
mod gaussian;
mod table;

pub use discrete::{CounterfactualCell, DiscreteDgp, DiscreteDraw, Hypothesis, TauModel};
pub use gaussian::{
    build_default_gaussian_dgp, oracle_counterfactual, sample_dataset, sample_panel_dataset,
    GaussianDgp,
};
pub use table::{sample_correlated_table, TableSampler};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const PROB_TOL: f64 = 1e-12;

/// How the attribute mechanism P(C | Y) is replaced when sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InterventionPolicy {
    /// Use the model's own (training) table.
    KeepTraining,
    /// The unconfounded distribution: C uniform and independent of Y.
    UniformC,
    /// Replace P(C | Y) with the given rows.
    FixedTable(Vec<Vec<f64>>),
    /// Hard intervention do(C = k).
    DoC(usize),
}

impl InterventionPolicy {
    /// Resolves the policy to explicit P(C | Y) rows.
    pub fn resolve(&self, training: &[Vec<f64>], num_attributes: usize) -> Result<Vec<Vec<f64>>> {
        let l = training.len();
        match self {
            InterventionPolicy::KeepTraining => Ok(training.to_vec()),
            InterventionPolicy::UniformC => {
                Ok(vec![vec![1.0 / num_attributes as f64; num_attributes]; l])
            }
            InterventionPolicy::FixedTable(rows) => {
                if rows.len() != l {
                    return Err(Error::AlphabetMismatch(rows.len(), l));
                }
                for row in rows {
                    if row.len() != num_attributes {
                        return Err(Error::AlphabetMismatch(row.len(), num_attributes));
                    }
                    check_distribution(row, "fixed_table row")?;
                }
                Ok(rows.clone())
            }
            InterventionPolicy::DoC(k) => {
                if *k >= num_attributes {
                    return Err(Error::OutOfRange(format!(
                        "do(C={k}) with K={num_attributes}"
                    )));
                }
                let mut row = vec![0.0; num_attributes];
                row[*k] = 1.0;
                Ok(vec![row; l])
            }
        }
    }
}

pub(crate) fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidTable(format!("{what}: empty")));
    }
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidTable(format!(
            "{what}: negative or non-finite entry"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidTable(format!("{what}: sums to {s}")));
    }
    Ok(())
}

/// Inverse-CDF draw from a finite distribution.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the last cumulative sum
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(p.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_variants() {
        let train = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        assert_eq!(
            InterventionPolicy::KeepTraining.resolve(&train, 2).unwrap(),
            train
        );
        assert_eq!(
            InterventionPolicy::UniformC.resolve(&train, 2).unwrap(),
            vec![vec![0.5, 0.5]; 2]
        );
        assert_eq!(
            InterventionPolicy::DoC(1).resolve(&train, 2).unwrap(),
            vec![vec![0.0, 1.0]; 2]
        );
        assert!(InterventionPolicy::DoC(2).resolve(&train, 2).is_err());
        let bad = InterventionPolicy::FixedTable(vec![vec![0.6, 0.6], vec![0.5, 0.5]]);
        assert!(bad.resolve(&train, 2).is_err());
    }

    #[test]
    fn categorical_never_picks_zero_mass() {
        let mut rng = crate::rng::seeded(3);
        for _ in 0..10_000 {
            let k = sample_categorical(&[0.0, 0.3, 0.0, 0.7, 0.0], &mut rng);
            assert!(k == 1 || k == 3);
        }
    }
}
