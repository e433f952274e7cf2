use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::augment::{ShiftPlan, ShiftRow};
use crate::data::LabeledExample;
use crate::dgp::GaussianDgp;
use crate::error::{Error, Result};

/// Row-indexed feature matrix accessed only through products.
pub trait Features: Sync {
    fn rows(&self) -> usize;
    fn dim(&self) -> usize;
    /// `out[r] = x_r . v`
    fn matvec(&self, v: &[f64], out: &mut [f64]);
    /// `out = sum_r coef[r] x_r`
    fn tmatvec(&self, coef: &[f64], out: &mut [f64]);
    /// Copies row `r` into `out`.
    fn row(&self, r: usize, out: &mut Vec<f64>);

    /// Per-column mean and population standard deviation.
    fn column_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let (n, d) = (self.rows(), self.dim());
        let mut mean = vec![0.0; d];
        let mut sq = vec![0.0; d];
        let mut buf = Vec::with_capacity(d);
        for r in 0..n {
            self.row(r, &mut buf);
            for j in 0..d {
                mean[j] += buf[j];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        for r in 0..n {
            self.row(r, &mut buf);
            for j in 0..d {
                sq[j] += (buf[j] - mean[j]).powi(2);
            }
        }
        let sd = sq.into_iter().map(|s| (s / n as f64).sqrt()).collect();
        (mean, sd)
    }
}

/// Plain dense matrix.
#[derive(Debug, Clone)]
pub struct DenseFeatures(pub Array2<f64>);

impl DenseFeatures {
    pub fn from_rows<'a>(rows: impl ExactSizeIterator<Item = &'a [f64]>) -> Result<Self> {
        let n = rows.len();
        let mut flat = Vec::new();
        let mut d = None;
        for r in rows {
            match d {
                None => d = Some(r.len()),
                Some(d) if d != r.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: r.len(),
                    })
                }
                _ => {}
            }
            flat.extend_from_slice(r);
        }
        let d = d.unwrap_or(0);
        Array2::from_shape_vec((n, d), flat)
            .map(DenseFeatures)
            .map_err(|e| Error::InvalidParameter(e.to_string()))
    }

    pub fn from_examples(data: &[LabeledExample]) -> Result<Self> {
        Self::from_rows(data.iter().map(|e| e.x.as_slice()))
    }
}

impl Features for DenseFeatures {
    fn rows(&self) -> usize {
        self.0.nrows()
    }

    fn dim(&self) -> usize {
        self.0.ncols()
    }

    fn matvec(&self, v: &[f64], out: &mut [f64]) {
        let r = self.0.dot(&ArrayView1::from(v));
        out.copy_from_slice(r.as_slice().expect("contiguous"));
    }

    fn tmatvec(&self, coef: &[f64], out: &mut [f64]) {
        let r = self.0.t().dot(&ArrayView1::from(coef));
        out.iter_mut().zip(r.iter()).for_each(|(o, v)| *o = *v);
    }

    fn row(&self, r: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.0.row(r).iter());
    }

    fn column_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.rows().max(1) as f64;
        let mean: Array1<f64> = self.0.sum_axis(Axis(0)) / n;
        let centered = &self.0 - &mean.view().insert_axis(Axis(0));
        let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
        (mean.to_vec(), var.mapv(f64::sqrt).to_vec())
    }
}

/// Attribute-shift augmentation kept implicit: row `r` is
/// `base[src_r] + xi_r (0; mu_to - mu_from)`.
#[derive(Debug, Clone)]
pub struct ShiftFeatures {
    base: Array2<f64>,
    attr_means: Array2<f64>,
    offset: usize,
    plan: Vec<ShiftRow>,
}

impl ShiftFeatures {
    pub fn new(dgp: &GaussianDgp, data: &[LabeledExample], plan: &ShiftPlan) -> Result<Self> {
        let base = DenseFeatures::from_examples(data)?.0;
        if base.ncols() != dgp.dim() {
            return Err(Error::DimensionMismatch {
                expected: dgp.dim(),
                got: base.ncols(),
            });
        }
        if let Some(r) = plan.rows.iter().find(|r| {
            r.source_idx >= data.len() || r.from >= dgp.num_attributes || r.to >= dgp.num_attributes
        }) {
            return Err(Error::CoverageGap {
                source_idx: r.source_idx,
                attribute: r.to,
            });
        }
        let flat: Vec<f64> = dgp.attr_means.iter().flatten().copied().collect();
        let attr_means = Array2::from_shape_vec((dgp.num_attributes, dgp.d_spu), flat)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(Self {
            base,
            attr_means,
            offset: dgp.d_star,
            plan: plan.rows.clone(),
        })
    }
}

impl Features for ShiftFeatures {
    fn rows(&self) -> usize {
        self.plan.len()
    }

    fn dim(&self) -> usize {
        self.base.ncols()
    }

    fn matvec(&self, v: &[f64], out: &mut [f64]) {
        let base = self.base.dot(&ArrayView1::from(v));
        let mu = self.attr_means.dot(&ArrayView1::from(&v[self.offset..]));
        for (o, r) in out.iter_mut().zip(&self.plan) {
            *o = base[r.source_idx];
            if r.from != r.to {
                *o += r.xi * (mu[r.to] - mu[r.from]);
            }
        }
    }

    fn tmatvec(&self, coef: &[f64], out: &mut [f64]) {
        let mut per_source = Array1::<f64>::zeros(self.base.nrows());
        let mut per_attr = Array1::<f64>::zeros(self.attr_means.nrows());
        for (c, r) in coef.iter().zip(&self.plan) {
            per_source[r.source_idx] += c;
            if r.from != r.to {
                per_attr[r.to] += c * r.xi;
                per_attr[r.from] -= c * r.xi;
            }
        }
        let base = self.base.t().dot(&per_source);
        let shift = self.attr_means.t().dot(&per_attr);
        out.iter_mut().zip(base.iter()).for_each(|(o, v)| *o = *v);
        out[self.offset..]
            .iter_mut()
            .zip(shift.iter())
            .for_each(|(o, v)| *o += v);
    }

    fn row(&self, r: usize, out: &mut Vec<f64>) {
        let p = &self.plan[r];
        out.clear();
        out.extend(self.base.row(p.source_idx).iter());
        if p.from != p.to {
            for ((o, to), from) in out[self.offset..]
                .iter_mut()
                .zip(self.attr_means.row(p.to))
                .zip(self.attr_means.row(p.from))
            {
                *o += p.xi * (to - from);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{build_augmented_dataset, corruption_plan, XiMode};
    use crate::dgp::{sample_dataset, InterventionPolicy};
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn shift_features_agree_with_materialized_rows() {
        let dgp = GaussianDgp::random(1, 3, 2, 4, 6, 0.1, 0.2, 1.0, 5.0).unwrap();
        let data = sample_dataset(&dgp, 7, &InterventionPolicy::UniformC, &mut seeded(2)).unwrap();
        let plan = corruption_plan(&dgp, &data, 0.4, XiMode::PerPair, &mut seeded(3)).unwrap();
        let shift = ShiftFeatures::new(&dgp, &data, &plan).unwrap();
        let aug = build_augmented_dataset(&data, &plan.materialize(&dgp, &data).unwrap()).unwrap();
        let dense = DenseFeatures::from_rows(aug.iter().map(|a| a.x.as_slice())).unwrap();
        assert_eq!(shift.rows(), dense.rows());

        let mut rng = seeded(4);
        let v: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let coef: Vec<f64> = (0..21).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (mut a, mut b) = (vec![0.0; 21], vec![0.0; 21]);
        shift.matvec(&v, &mut a);
        dense.matvec(&v, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        let (mut a, mut b) = (vec![0.0; 10], vec![0.0; 10]);
        shift.tmatvec(&coef, &mut a);
        dense.tmatvec(&coef, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        let (m1, s1) = shift.column_moments();
        let (m2, s2) = dense.column_moments();
        for j in 0..10 {
            assert!((m1[j] - m2[j]).abs() < 1e-12 && (s1[j] - s2[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(DenseFeatures::from_rows(rows.iter().map(|r| r.as_slice())).is_err());
    }
}
