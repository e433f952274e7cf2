use serde::{Deserialize, Serialize};

use super::LinearModel;
use crate::data::LabeledExample;
use crate::error::{Error, Result};
use crate::metrics::Classifier;

/// Confusion counts of one (y, c) cell: `predicted[k]` examples were
/// assigned class k.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStats {
    pub y: usize,
    pub c: usize,
    pub count: usize,
    pub predicted: Vec<usize>,
}

impl GroupStats {
    pub fn accuracy(&self) -> f64 {
        self.predicted.get(self.y).copied().unwrap_or(0) as f64 / self.count as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n: usize,
    pub accuracy: f64,
    pub risk: f64,
    pub groups: Vec<GroupStats>,
}

impl Evaluation {
    pub fn worst_group_accuracy(&self) -> f64 {
        self.groups
            .iter()
            .map(GroupStats::accuracy)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn evaluate_classifier<C: Classifier + ?Sized>(
    model: &C,
    data: &[LabeledExample],
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::InvalidParameter("empty evaluation set".into()));
    }
    let l = data.iter().map(|e| e.y + 1).max().unwrap_or(0).max(2);
    let mut cells: std::collections::BTreeMap<(usize, usize), Vec<usize>> = Default::default();
    let mut correct = 0;
    for e in data {
        let p = model.predict(&e.x);
        correct += (p == e.y) as usize;
        let row = cells.entry((e.y, e.c)).or_insert_with(|| vec![0; l]);
        if p >= row.len() {
            row.resize(p + 1, 0);
        }
        row[p] += 1;
    }
    let accuracy = correct as f64 / data.len() as f64;
    let groups = cells
        .into_iter()
        .map(|((y, c), predicted)| GroupStats {
            y,
            c,
            count: predicted.iter().sum(),
            predicted,
        })
        .collect();
    Ok(Evaluation {
        n: data.len(),
        accuracy,
        risk: 1.0 - accuracy,
        groups,
    })
}

pub fn evaluate(model: &LinearModel, data: &[LabeledExample]) -> Result<Evaluation> {
    if let Some(e) = data.iter().find(|e| e.x.len() != model.dim()) {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: e.x.len(),
        });
    }
    evaluate_classifier(model, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Vec<LabeledExample> {
        (0..20)
            .map(|i| LabeledExample::new(vec![i as f64 - 9.5], (i >= 10) as usize, i % 3))
            .collect()
    }

    #[test]
    fn constant_and_perfect() {
        let d = data();
        let constant = LinearModel {
            weights: vec![0.0],
            bias: -1.0,
        };
        assert_eq!(evaluate(&constant, &d).unwrap().accuracy, 0.5);
        let perfect = LinearModel {
            weights: vec![1.0],
            bias: 0.0,
        };
        let ev = evaluate(&perfect, &d).unwrap();
        assert_eq!(ev.accuracy, 1.0);
        assert_eq!(ev.worst_group_accuracy(), 1.0);
    }

    #[test]
    fn accuracy_matches_independent_loop() {
        let d = data();
        let m = LinearModel {
            weights: vec![0.7],
            bias: 2.0,
        };
        let ev = evaluate(&m, &d).unwrap();
        let mut loss = 0.0;
        for e in &d {
            let logit = 0.7 * e.x[0] + 2.0;
            loss += ((logit > 0.0) as usize != e.y) as u8 as f64;
        }
        assert!((ev.accuracy - (1.0 - loss / 20.0)).abs() < 1e-15);
        assert_eq!(ev.groups.iter().map(|g| g.count).sum::<usize>(), 20);
        assert_eq!(ev.groups.len(), 6);
        assert!(evaluate(&LinearModel::zeros(2), &d).is_err());
    }
}
