//! Dependence between label and attribute: mutual information and the
//! exponentiated Rényi dependence of the joint against its product marginals.

use serde::{Deserialize, Serialize};

use crate::data::LabeledExample;
use crate::error::{Error, Result};

const TABLE_TOL: f64 = 1e-12;

/// Joint distribution P(Y=y, C=c) as an L x K row-major table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiUnit {
    Nats,
    Bits,
}

impl MiUnit {
    pub fn label(self) -> &'static str {
        match self {
            MiUnit::Nats => "nats",
            MiUnit::Bits => "bits",
        }
    }

    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            MiUnit::Nats => nats,
            MiUnit::Bits => nats / std::f64::consts::LN_2,
        }
    }

    /// Largest attainable I(Y;C) for the given alphabet sizes.
    pub fn max_for(self, num_classes: usize, num_attributes: usize) -> f64 {
        self.from_nats((num_classes.min(num_attributes) as f64).ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RenyiOrder {
    Two,
    Infinity,
}

impl JointTable {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        let k = probs.first().map(Vec::len).unwrap_or(0);
        if probs.is_empty() || k == 0 {
            return Err(Error::InvalidTable("empty joint table".into()));
        }
        let mut total = 0.0;
        for row in &probs {
            if row.len() != k {
                return Err(Error::InvalidTable("ragged joint table".into()));
            }
            for &p in row {
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(Error::InvalidTable(format!("bad cell {p}")));
                }
                total += p;
            }
        }
        if (total - 1.0).abs() > TABLE_TOL {
            return Err(Error::InvalidTable(format!("total mass {total}")));
        }
        Ok(Self { probs })
    }

    /// Joint from a label prior and per-class attribute conditionals.
    pub fn from_conditionals(p_y: &[f64], p_c_given_y: &[Vec<f64>]) -> Result<Self> {
        if p_y.len() != p_c_given_y.len() {
            return Err(Error::AlphabetMismatch(p_y.len(), p_c_given_y.len()));
        }
        let probs = p_y
            .iter()
            .zip(p_c_given_y)
            .map(|(&py, row)| row.iter().map(|&pc| py * pc).collect())
            .collect();
        Self::new(probs)
    }

    /// Plug-in joint from counts; alphabet sizes given explicitly so empty
    /// cells and unobserved values are kept.
    pub fn from_examples(
        data: &[LabeledExample],
        num_classes: usize,
        num_attributes: usize,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidParameter("no examples".into()));
        }
        let mut counts = vec![vec![0usize; num_attributes]; num_classes];
        for e in data {
            if e.y >= num_classes || e.c >= num_attributes {
                return Err(Error::OutOfRange(format!("cell ({}, {})", e.y, e.c)));
            }
            counts[e.y][e.c] += 1;
        }
        let n = data.len() as f64;
        Self::new(
            counts
                .into_iter()
                .map(|row| row.into_iter().map(|c| c as f64 / n).collect())
                .collect(),
        )
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn num_attributes(&self) -> usize {
        self.probs[0].len()
    }

    pub fn get(&self, y: usize, c: usize) -> f64 {
        self.probs[y][c]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn class_marginal(&self) -> Vec<f64> {
        self.probs.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn attribute_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_attributes()];
        for row in &self.probs {
            for (o, p) in out.iter_mut().zip(row) {
                *o += p;
            }
        }
        out
    }

    fn checked_marginals(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let py = self.class_marginal();
        let pc = self.attribute_marginal();
        if let Some(index) = py.iter().position(|&p| p <= 0.0) {
            return Err(Error::ZeroMarginal { axis: "Y", index });
        }
        if let Some(index) = pc.iter().position(|&p| p <= 0.0) {
            return Err(Error::ZeroMarginal { axis: "C", index });
        }
        Ok((py, pc))
    }
}

/// I(Y;C) in nats; empty cells contribute zero.
pub fn mutual_information(jt: &JointTable) -> f64 {
    let py = jt.class_marginal();
    let pc = jt.attribute_marginal();
    let mut mi = 0.0;
    for (y, row) in jt.rows().iter().enumerate() {
        for (c, &p) in row.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (py[y] * pc[c])).ln();
            }
        }
    }
    // rounding can leave a -1e-17 residue on product tables
    mi.max(0.0)
}

pub fn mutual_information_in(jt: &JointTable, unit: MiUnit) -> f64 {
    unit.from_nats(mutual_information(jt))
}

/// Exponentiated Rényi divergence between the joint and the product of its
/// marginals: `sum p^2/(p_y p_c)` for order two, the maximal cell ratio for
/// order infinity.
pub fn renyi_dependence(jt: &JointTable, order: RenyiOrder) -> Result<f64> {
    let (py, pc) = jt.checked_marginals()?;
    let ratios = jt.rows().iter().enumerate().flat_map(|(y, row)| {
        let py = py[y];
        let pc = &pc;
        row.iter()
            .enumerate()
            .map(move |(c, &p)| (p, p / (py * pc[c])))
    });
    Ok(match order {
        RenyiOrder::Two => ratios.map(|(p, r)| p * r).sum(),
        RenyiOrder::Infinity => ratios.map(|(_, r)| r).fold(f64::NEG_INFINITY, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(rows: &[&[f64]]) -> JointTable {
        JointTable::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn independent_uniform_has_zero_mi_and_unit_dependence() {
        let jt = table(&[&[0.25, 0.25], &[0.25, 0.25]]);
        assert_eq!(mutual_information(&jt), 0.0);
        assert!((renyi_dependence(&jt, RenyiOrder::Two).unwrap() - 1.0).abs() < 1e-15);
        assert!((renyi_dependence(&jt, RenyiOrder::Infinity).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_uniform() {
        let jt = table(&[&[0.5, 0.0], &[0.0, 0.5]]);
        assert!((mutual_information(&jt) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((mutual_information_in(&jt, MiUnit::Bits) - 1.0).abs() < 1e-15);
        assert_eq!(renyi_dependence(&jt, RenyiOrder::Two).unwrap(), 2.0);
        assert_eq!(renyi_dependence(&jt, RenyiOrder::Infinity).unwrap(), 2.0);
    }

    #[test]
    fn hand_computed_mixed_table() {
        // every marginal is 1/2: cells 0.4 -> ratio 1.6, cells 0.1 -> ratio 0.4
        let jt = table(&[&[0.4, 0.1], &[0.1, 0.4]]);
        let expected_mi = 2.0 * 0.4 * (1.6f64).ln() + 2.0 * 0.1 * (0.4f64).ln();
        assert!((mutual_information(&jt) - expected_mi).abs() < 1e-15);
        let expected_d2 = 2.0 * 0.4 * 1.6 + 2.0 * 0.1 * 0.4;
        assert!((renyi_dependence(&jt, RenyiOrder::Two).unwrap() - expected_d2).abs() < 1e-15);
        assert_eq!(renyi_dependence(&jt, RenyiOrder::Infinity).unwrap(), 1.6);
    }

    #[test]
    fn zero_marginal_is_an_error() {
        let jt = table(&[&[0.5, 0.5], &[0.0, 0.0]]);
        assert!(matches!(
            renyi_dependence(&jt, RenyiOrder::Two),
            Err(Error::ZeroMarginal {
                axis: "Y",
                index: 1
            })
        ));
    }

    #[test]
    fn invalid_tables_rejected() {
        assert!(JointTable::new(vec![vec![0.5, 0.4]]).is_err());
        assert!(JointTable::new(vec![vec![1.5, -0.5]]).is_err());
        assert!(JointTable::new(vec![vec![0.5], vec![0.25, 0.25]]).is_err());
    }

    fn arb_table() -> impl Strategy<Value = JointTable> {
        (1usize..5, 1usize..6).prop_flat_map(|(l, k)| {
            proptest::collection::vec(0.01f64..1.0, l * k).prop_map(move |cells| {
                let total: f64 = cells.iter().sum();
                let probs = cells
                    .chunks(k)
                    .map(|r| r.iter().map(|v| v / total).collect())
                    .collect();
                JointTable { probs }
            })
        })
    }

    proptest! {
        #[test]
        fn mi_within_bounds(jt in arb_table()) {
            let mi = mutual_information(&jt);
            let cap = (jt.num_classes().min(jt.num_attributes()) as f64).ln();
            prop_assert!(mi >= 0.0 && mi <= cap + 1e-12);
        }

        #[test]
        fn renyi_orders_are_monotone(jt in arb_table()) {
            let d2 = renyi_dependence(&jt, RenyiOrder::Two).unwrap();
            let dinf = renyi_dependence(&jt, RenyiOrder::Infinity).unwrap();
            prop_assert!(d2 >= 1.0 - 1e-12);
            prop_assert!(dinf >= d2 - 1e-12);
        }

        #[test]
        fn product_tables_are_independent(
            py in proptest::collection::vec(0.05f64..1.0, 1..4),
            pc in proptest::collection::vec(0.05f64..1.0, 1..5),
        ) {
            let sy: f64 = py.iter().sum();
            let sc: f64 = pc.iter().sum();
            let probs: Vec<Vec<f64>> = py.iter()
                .map(|a| pc.iter().map(|b| a / sy * b / sc).collect())
                .collect();
            let jt = JointTable { probs };
            prop_assert!(mutual_information(&jt) < 1e-12);
            prop_assert!((renyi_dependence(&jt, RenyiOrder::Two).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((renyi_dependence(&jt, RenyiOrder::Infinity).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
