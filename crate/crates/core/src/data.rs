//! Labeled examples and the dataset CSV format.
//!
//! Columns: `idx, y, c, x_0..x_{d-1}`, then optionally `m_0..` and
//! `xpre_0..`. Floats are written with Rust's shortest round-trip formatting,
//! so a write/read cycle reproduces every value bit for bit.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub x: Vec<f64>,
    pub y: usize,
    pub c: usize,
    pub m: Option<Vec<f64>>,
    pub x_pre: Option<Vec<f64>>,
}

impl LabeledExample {
    pub fn new(x: Vec<f64>, y: usize, c: usize) -> Self {
        Self {
            x,
            y,
            c,
            m: None,
            x_pre: None,
        }
    }

    /// Checks the per-example invariants against class/attribute counts.
    pub fn validate(&self, num_classes: usize, num_attributes: usize) -> Result<()> {
        if self.y >= num_classes {
            return Err(Error::OutOfRange(format!(
                "label {} >= {num_classes}",
                self.y
            )));
        }
        if self.c >= num_attributes {
            return Err(Error::OutOfRange(format!(
                "attribute {} >= {num_attributes}",
                self.c
            )));
        }
        if let Some(pre) = &self.x_pre {
            if pre.len() != self.x.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.x.len(),
                    got: pre.len(),
                });
            }
        }
        Ok(())
    }
}

/// Number of classes and attributes implied by the largest observed indices.
pub fn observed_cardinalities(data: &[LabeledExample]) -> (usize, usize) {
    let l = data.iter().map(|e| e.y + 1).max().unwrap_or(0);
    let k = data.iter().map(|e| e.c + 1).max().unwrap_or(0);
    (l, k)
}

/// Shared dimensions of (x, m, x_pre); `None` for absent optional parts.
pub(crate) fn layout(data: &[LabeledExample]) -> Result<(usize, Option<usize>, Option<usize>)> {
    let Some(first) = data.first() else {
        return Ok((0, None, None));
    };
    let d = first.x.len();
    let dm = first.m.as_ref().map(Vec::len);
    let dp = first.x_pre.as_ref().map(Vec::len);
    for e in data {
        if e.x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: e.x.len(),
            });
        }
        if e.m.as_ref().map(Vec::len) != dm {
            return Err(Error::InvalidParameter(
                "auxiliary vectors must be present on all examples with one dimension".into(),
            ));
        }
        if e.x_pre.as_ref().map(Vec::len) != dp {
            return Err(Error::InvalidParameter(
                "pre-treatment vectors must be present on all examples with one dimension".into(),
            ));
        }
    }
    Ok((d, dm, dp))
}

pub(crate) fn dataset_header(d: usize, dm: Option<usize>, dp: Option<usize>) -> Vec<String> {
    let mut header = vec!["idx".to_string(), "y".to_string(), "c".to_string()];
    header.extend((0..d).map(|j| format!("x_{j}")));
    if let Some(dm) = dm {
        header.extend((0..dm).map(|j| format!("m_{j}")));
    }
    if let Some(dp) = dp {
        header.extend((0..dp).map(|j| format!("xpre_{j}")));
    }
    header
}

pub(crate) fn example_fields(idx: usize, e: &LabeledExample) -> Vec<String> {
    let mut row = vec![idx.to_string(), e.y.to_string(), e.c.to_string()];
    row.extend(e.x.iter().map(|v| v.to_string()));
    if let Some(m) = &e.m {
        row.extend(m.iter().map(|v| v.to_string()));
    }
    if let Some(p) = &e.x_pre {
        row.extend(p.iter().map(|v| v.to_string()));
    }
    row
}

pub fn write_dataset<W: Write>(writer: W, data: &[LabeledExample]) -> Result<()> {
    let (d, dm, dp) = layout(data)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(dataset_header(d, dm, dp))?;
    for (i, e) in data.iter().enumerate() {
        w.write_record(example_fields(i, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_file(path: impl AsRef<Path>, data: &[LabeledExample]) -> Result<()> {
    write_dataset(File::create(path)?, data)
}

/// Column positions of each block in a dataset-style header.
#[derive(Debug, Clone)]
pub(crate) struct Columns {
    pub y: usize,
    pub c: usize,
    pub x: Vec<usize>,
    pub m: Vec<usize>,
    pub x_pre: Vec<usize>,
}

fn indexed_block(header: &csv::StringRecord, prefix: &str) -> Vec<usize> {
    let mut cols: Vec<(usize, usize)> = header
        .iter()
        .enumerate()
        .filter_map(|(pos, name)| {
            name.strip_prefix(prefix)
                .and_then(|rest| rest.parse::<usize>().ok())
                .map(|j| (j, pos))
        })
        .collect();
    cols.sort_unstable();
    cols.into_iter().map(|(_, pos)| pos).collect()
}

pub(crate) fn locate_columns(header: &csv::StringRecord, path: &str) -> Result<Columns> {
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema {
                path: path.to_string(),
                row: 1,
                message: format!("missing column `{name}`"),
            })
    };
    find("idx")?;
    let columns = Columns {
        y: find("y")?,
        c: find("c")?,
        x: indexed_block(header, "x_"),
        m: indexed_block(header, "m_"),
        x_pre: indexed_block(header, "xpre_"),
    };
    if columns.x.is_empty() {
        return Err(Error::Schema {
            path: path.to_string(),
            row: 1,
            message: "no x_<j> columns".into(),
        });
    }
    if !columns.x_pre.is_empty() && columns.x_pre.len() != columns.x.len() {
        return Err(Error::Schema {
            path: path.to_string(),
            row: 1,
            message: "xpre block must match the x block".into(),
        });
    }
    Ok(columns)
}

pub(crate) fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    pos: usize,
    path: &str,
    row: usize,
) -> Result<T> {
    let raw = record.get(pos).unwrap_or("");
    raw.trim().parse::<T>().map_err(|_| Error::Schema {
        path: path.to_string(),
        row,
        message: format!("cannot parse `{raw}` in column {pos}"),
    })
}

pub(crate) fn parse_example(
    record: &csv::StringRecord,
    cols: &Columns,
    path: &str,
    row: usize,
) -> Result<LabeledExample> {
    let floats = |positions: &[usize]| -> Result<Vec<f64>> {
        positions
            .iter()
            .map(|&p| parse_field::<f64>(record, p, path, row))
            .collect()
    };
    Ok(LabeledExample {
        x: floats(&cols.x)?,
        y: parse_field(record, cols.y, path, row)?,
        c: parse_field(record, cols.c, path, row)?,
        m: (!cols.m.is_empty()).then(|| floats(&cols.m)).transpose()?,
        x_pre: (!cols.x_pre.is_empty())
            .then(|| floats(&cols.x_pre))
            .transpose()?,
    })
}

pub fn read_dataset<R: Read>(reader: R, label: &str) -> Result<Vec<LabeledExample>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let cols = locate_columns(&header, label)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        // header is row 1
        out.push(parse_example(&rec, &cols, label, i + 2)?);
    }
    Ok(out)
}

pub fn read_dataset_file(path: impl AsRef<Path>) -> Result<Vec<LabeledExample>> {
    let path = path.as_ref();
    read_dataset(File::open(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_example(
        d: usize,
        with_m: bool,
        with_pre: bool,
    ) -> impl Strategy<Value = LabeledExample> {
        (
            proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), d),
            0usize..2,
            0usize..8,
            proptest::collection::vec(-1e3f64..1e3, 2),
            proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), d),
        )
            .prop_map(move |(x, y, c, m, pre)| LabeledExample {
                x,
                y,
                c,
                m: with_m.then_some(m),
                x_pre: with_pre.then_some(pre),
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(
            data in (any::<bool>(), any::<bool>()).prop_flat_map(|(m, p)| {
                proptest::collection::vec(arb_example(3, m, p), 1..12)
            })
        ) {
            let mut buf = Vec::new();
            write_dataset(&mut buf, &data).unwrap();
            let back = read_dataset(buf.as_slice(), "mem").unwrap();
            prop_assert_eq!(back.len(), data.len());
            for (a, b) in data.iter().zip(&back) {
                let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
                prop_assert_eq!(bits(&a.x), bits(&b.x));
                prop_assert_eq!(a.y, b.y);
                prop_assert_eq!(a.c, b.c);
                prop_assert_eq!(a.m.as_deref().map(bits), b.m.as_deref().map(bits));
                prop_assert_eq!(a.x_pre.as_deref().map(bits), b.x_pre.as_deref().map(bits));
            }
        }
    }

    #[test]
    fn header_layout() {
        let data = vec![LabeledExample {
            x: vec![1.0, 2.0],
            y: 1,
            c: 0,
            m: Some(vec![3.0]),
            x_pre: Some(vec![0.5, 0.25]),
        }];
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "idx,y,c,x_0,x_1,m_0,xpre_0,xpre_1"
        );
        assert_eq!(text.lines().nth(1).unwrap(), "0,1,0,1,2,3,0.5,0.25");
    }

    #[test]
    fn schema_errors_carry_row_numbers() {
        let text = "idx,y,c,x_0\n0,1,0,0.5\n1,zero,0,1.0\n";
        let err = read_dataset(text.as_bytes(), "mem").unwrap_err();
        match err {
            Error::Schema { row, .. } => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mixed_aux_presence_is_rejected() {
        let mut a = LabeledExample::new(vec![0.0], 0, 0);
        a.m = Some(vec![1.0]);
        let b = LabeledExample::new(vec![0.0], 0, 0);
        assert!(write_dataset(Vec::new(), &[a, b]).is_err());
    }

    #[test]
    fn validate_checks_ranges_and_pre_dimension() {
        let mut e = LabeledExample::new(vec![0.0, 1.0], 1, 3);
        assert!(e.validate(2, 4).is_ok());
        assert!(e.validate(1, 4).is_err());
        assert!(e.validate(2, 3).is_err());
        e.x_pre = Some(vec![0.0]);
        assert!(matches!(
            e.validate(2, 4),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
