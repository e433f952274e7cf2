use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{CounterfactualSet, Provenance};
use crate::data::{dataset_header, example_fields, layout, LabeledExample};
use crate::error::{Error, Result};
use crate::metrics::Classifier;

/// One record of the augmented training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedExample {
    pub x: Vec<f64>,
    pub y: usize,
    pub source_idx: usize,
    pub c_source: usize,
    pub c_target: usize,
    pub provenance: Provenance,
}

impl AugmentedExample {
    /// The record as a labeled example carrying its target attribute.
    pub fn to_example(&self) -> LabeledExample {
        LabeledExample::new(self.x.clone(), self.y, self.c_target)
    }
}

/// All N*K pairs `(x_hat_i(c), y_i)`, source-major and attribute-minor.
pub fn build_augmented_dataset(
    data: &[LabeledExample],
    cfs: &CounterfactualSet,
) -> Result<Vec<AugmentedExample>> {
    if cfs.len() != data.len() {
        return Err(Error::CoverageGap {
            source_idx: cfs.len().min(data.len()),
            attribute: 0,
        });
    }
    let mut out = Vec::with_capacity(data.len() * cfs.num_attributes);
    for (i, ex) in data.iter().enumerate() {
        for c in 0..cfs.num_attributes {
            let cf = cfs.get(i, c).ok_or(Error::CoverageGap {
                source_idx: i,
                attribute: c,
            })?;
            if cf.x.len() != ex.x.len() {
                return Err(Error::DimensionMismatch {
                    expected: ex.x.len(),
                    got: cf.x.len(),
                });
            }
            out.push(AugmentedExample {
                x: cf.x.clone(),
                y: ex.y,
                source_idx: i,
                c_source: ex.c,
                c_target: c,
                provenance: cf.provenance.clone(),
            });
        }
    }
    Ok(out)
}

/// Like [`build_augmented_dataset`] but skips missing entries (pairs dropped
/// for lack of a match).
pub fn build_available_augmented_dataset(
    data: &[LabeledExample],
    cfs: &CounterfactualSet,
) -> Result<Vec<AugmentedExample>> {
    if cfs.len() != data.len() {
        return Err(Error::CoverageGap {
            source_idx: cfs.len().min(data.len()),
            attribute: 0,
        });
    }
    let mut out = Vec::new();
    for (i, ex) in data.iter().enumerate() {
        for c in 0..cfs.num_attributes {
            if let Some(cf) = cfs.get(i, c) {
                out.push(AugmentedExample {
                    x: cf.x.clone(),
                    y: ex.y,
                    source_idx: i,
                    c_source: ex.c,
                    c_target: c,
                    provenance: cf.provenance.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// `(1 / NK) sum_i sum_c 1[h(x_hat_i(c)) != y_i]`, summed directly over the set.
pub fn augmented_empirical_risk<C: Classifier + ?Sized>(
    data: &[LabeledExample],
    cfs: &CounterfactualSet,
    h: &C,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidParameter("empty dataset".into()));
    }
    let k = cfs.num_attributes;
    let mut errors = 0usize;
    for (i, ex) in data.iter().enumerate() {
        for c in 0..k {
            let cf = cfs.get(i, c).ok_or(Error::CoverageGap {
                source_idx: i,
                attribute: c,
            })?;
            errors += (h.predict(&cf.x) != ex.y) as usize;
        }
    }
    Ok(errors as f64 / (data.len() * k) as f64)
}

/// Dataset CSV schema with `source_idx`, `c_target` and `provenance`
/// appended; the `c` column holds the source attribute.
pub fn write_augmented_dataset<W: Write>(writer: W, records: &[AugmentedExample]) -> Result<()> {
    let as_examples: Vec<LabeledExample> = records
        .iter()
        .map(|r| LabeledExample::new(r.x.clone(), r.y, r.c_source))
        .collect();
    let (d, _, _) = layout(&as_examples)?;
    let mut w = csv::Writer::from_writer(writer);
    let mut header = dataset_header(d, None, None);
    header.extend(["source_idx", "c_target", "provenance"].map(String::from));
    w.write_record(&header)?;
    for (idx, (r, e)) in records.iter().zip(&as_examples).enumerate() {
        let mut row = example_fields(idx, e);
        row.push(r.source_idx.to_string());
        row.push(r.c_target.to_string());
        row.push(r.provenance.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
