//! Counterfactual estimates `x_hat_i(c)` and the augmented training set.

mod assemble;
mod corrupt;
mod matching;

pub use assemble::{
    augmented_empirical_risk, build_augmented_dataset, build_available_augmented_dataset,
    write_augmented_dataset, AugmentedExample,
};
pub use corrupt::{
    corrupt_counterfactuals, corruption_plan, oracle_plan, ShiftPlan, ShiftRow, XiMode,
};
pub use matching::{
    diff_in_diff, diff_in_diff_all, match_examples, DidOutcome, MatchConfig, MatchMetric,
    NoMatchPolicy,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a counterfactual vector came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Original,
    Oracle,
    Corrupted { lambda: f64, xi: f64 },
    DiffInDiff { matches: Vec<usize> },
    Matched { matches: Vec<usize> },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |m: &[usize]| m.iter().map(usize::to_string).collect::<Vec<_>>().join("|");
        match self {
            Provenance::Original => write!(f, "original"),
            Provenance::Oracle => write!(f, "oracle"),
            Provenance::Corrupted { lambda, xi } => write!(f, "corrupted(lambda={lambda};xi={xi})"),
            Provenance::DiffInDiff { matches } => write!(f, "diff_in_diff({})", join(matches)),
            Provenance::Matched { matches } => write!(f, "matched({})", join(matches)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub x: Vec<f64>,
    pub provenance: Provenance,
}

/// Per source example, one slot per attribute value; slot `c_i` holds the
/// original vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualSet {
    pub num_attributes: usize,
    pub entries: Vec<Vec<Option<Counterfactual>>>,
}

impl CounterfactualSet {
    /// A set holding only the originals.
    pub fn originals(data: &[crate::data::LabeledExample], num_attributes: usize) -> Result<Self> {
        let mut entries = Vec::with_capacity(data.len());
        for ex in data {
            if ex.c >= num_attributes {
                return Err(Error::OutOfRange(format!(
                    "attribute {} with K={num_attributes}",
                    ex.c
                )));
            }
            let mut row = vec![None; num_attributes];
            row[ex.c] = Some(Counterfactual {
                x: ex.x.clone(),
                provenance: Provenance::Original,
            });
            entries.push(row);
        }
        Ok(Self {
            num_attributes,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize, c: usize) -> Option<&Counterfactual> {
        self.entries.get(i)?.get(c)?.as_ref()
    }

    /// Fills empty slots of `self` from `other`.
    pub fn merge(&mut self, other: CounterfactualSet) -> Result<()> {
        if other.num_attributes != self.num_attributes || other.len() != self.len() {
            return Err(Error::AlphabetMismatch(
                other.num_attributes,
                self.num_attributes,
            ));
        }
        for (mine, theirs) in self.entries.iter_mut().zip(other.entries) {
            for (slot, cf) in mine.iter_mut().zip(theirs) {
                if slot.is_none() {
                    *slot = cf;
                }
            }
        }
        Ok(())
    }

    /// First missing (source, attribute) pair, if any.
    pub fn first_gap(&self) -> Option<(usize, usize)> {
        self.entries
            .iter()
            .enumerate()
            .find_map(|(i, row)| row.iter().position(Option::is_none).map(|c| (i, c)))
    }
}
