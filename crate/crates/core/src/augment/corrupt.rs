use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Counterfactual, CounterfactualSet, Provenance};
use crate::data::LabeledExample;
use crate::dgp::GaussianDgp;
use crate::error::{Error, Result};
use crate::metrics::XiLaw;

/// How corruption factors are shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiMode {
    /// A fresh draw for every (example, target) pair.
    PerPair,
    /// One draw per example, shared by all its targets.
    PerExample,
    /// xi equals lambda.
    Deterministic,
}

impl XiMode {
    pub fn law(self, lambda: f64) -> XiLaw {
        match self {
            XiMode::Deterministic => XiLaw::Fixed(lambda),
            _ => XiLaw::truncated(lambda),
        }
    }
}

/// Augmented row `x_src + xi (0; mu_to - mu_from)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub source_idx: usize,
    pub from: usize,
    pub to: usize,
    pub xi: f64,
}

/// Compact description of an attribute-shift augmentation: N*K rows,
/// source-major, attribute-minor. `lambda` is `None` for the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftPlan {
    pub num_attributes: usize,
    pub lambda: Option<f64>,
    pub rows: Vec<ShiftRow>,
}

fn truncated_draw<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    loop {
        let xi = mean + sd * rng.sample::<f64, _>(StandardNormal);
        if xi > 0.0 && xi <= 1.0 {
            return xi;
        }
    }
}

fn check_sources(dgp: &GaussianDgp, data: &[LabeledExample]) -> Result<()> {
    for ex in data {
        if ex.x.len() != dgp.dim() {
            return Err(Error::DimensionMismatch {
                expected: dgp.dim(),
                got: ex.x.len(),
            });
        }
        if ex.c >= dgp.num_attributes {
            return Err(Error::OutOfRange(format!("attribute {}", ex.c)));
        }
    }
    Ok(())
}

/// Exact counterfactuals for every (i, c).
pub fn oracle_plan(dgp: &GaussianDgp, data: &[LabeledExample]) -> Result<ShiftPlan> {
    check_sources(dgp, data)?;
    let k = dgp.num_attributes;
    let rows = data
        .iter()
        .enumerate()
        .flat_map(|(i, ex)| {
            (0..k).map(move |c| ShiftRow {
                source_idx: i,
                from: ex.c,
                to: c,
                xi: if c == ex.c { 0.0 } else { 1.0 },
            })
        })
        .collect();
    Ok(ShiftPlan {
        num_attributes: k,
        lambda: None,
        rows,
    })
}

/// Corrupted counterfactuals: the attribute shift scaled by xi with xi from
/// N(lambda, 0.1^2) truncated to (0, 1] (or xi = lambda in deterministic mode).
pub fn corruption_plan<R: Rng + ?Sized>(
    dgp: &GaussianDgp,
    data: &[LabeledExample],
    lambda: f64,
    mode: XiMode,
    rng: &mut R,
) -> Result<ShiftPlan> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda {lambda} outside (0, 1]"
        )));
    }
    check_sources(dgp, data)?;
    let k = dgp.num_attributes;
    let mut rows = Vec::with_capacity(data.len() * k);
    for (i, ex) in data.iter().enumerate() {
        let shared = match mode {
            XiMode::PerExample => truncated_draw(lambda, 0.1, rng),
            _ => lambda,
        };
        for c in 0..k {
            let xi = if c == ex.c {
                0.0
            } else {
                match mode {
                    XiMode::PerPair => truncated_draw(lambda, 0.1, rng),
                    _ => shared,
                }
            };
            rows.push(ShiftRow {
                source_idx: i,
                from: ex.c,
                to: c,
                xi,
            });
        }
    }
    Ok(ShiftPlan {
        num_attributes: k,
        lambda: Some(lambda),
        rows,
    })
}

impl ShiftPlan {
    pub fn provenance(&self, row: &ShiftRow) -> Provenance {
        match self.lambda {
            _ if row.from == row.to => Provenance::Original,
            None => Provenance::Oracle,
            Some(lambda) => Provenance::Corrupted { lambda, xi: row.xi },
        }
    }

    /// Writes the shifted vector of `row` into `out`.
    pub fn apply(&self, dgp: &GaussianDgp, source: &[f64], row: &ShiftRow, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(source);
        if row.from != row.to {
            for ((xi, to), from) in out[dgp.d_star..]
                .iter_mut()
                .zip(&dgp.attr_means[row.to])
                .zip(&dgp.attr_means[row.from])
            {
                *xi += row.xi * (to - from);
            }
        }
    }

    pub fn materialize(
        &self,
        dgp: &GaussianDgp,
        data: &[LabeledExample],
    ) -> Result<CounterfactualSet> {
        let mut set = CounterfactualSet {
            num_attributes: self.num_attributes,
            entries: vec![vec![None; self.num_attributes]; data.len()],
        };
        for row in &self.rows {
            let src = data.get(row.source_idx).ok_or(Error::CoverageGap {
                source_idx: row.source_idx,
                attribute: row.to,
            })?;
            let x = if row.from == row.to {
                src.x.clone()
            } else {
                let mut v = Vec::new();
                self.apply(dgp, &src.x, row, &mut v);
                v
            };
            set.entries[row.source_idx][row.to] = Some(Counterfactual {
                x,
                provenance: self.provenance(row),
            });
        }
        Ok(set)
    }
}

/// Materialized corrupted counterfactual set.
pub fn corrupt_counterfactuals<R: Rng + ?Sized>(
    dgp: &GaussianDgp,
    data: &[LabeledExample],
    lambda: f64,
    mode: XiMode,
    rng: &mut R,
) -> Result<CounterfactualSet> {
    corruption_plan(dgp, data, lambda, mode, rng)?.materialize(dgp, data)
}
