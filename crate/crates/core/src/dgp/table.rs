use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::GaussianDgp;
use crate::error::{Error, Result};
use crate::metrics::{mutual_information, JointTable, MiUnit};

/// Dirichlet-plus-rejection sampler for correlated attribute tables.
///
/// A coarse grid of concentrations is piloted first; the concentration with
/// the best acceptance rate (and its neighbours) is then used for rejection
/// until the induced I(Y;C) lands inside the target interval.
#[derive(Debug, Clone)]
pub struct TableSampler {
    pub unit: MiUnit,
    pub attempt_budget: usize,
    pub pilot_draws: usize,
    pub alpha_grid: Vec<f64>,
}

impl Default for TableSampler {
    fn default() -> Self {
        Self {
            unit: MiUnit::Bits,
            attempt_budget: 100_000,
            pilot_draws: 24,
            // 10^-2 .. 10^12 in quarter decades
            alpha_grid: (0..=56)
                .map(|j| 10f64.powf(-2.0 + 0.25 * j as f64))
                .collect(),
        }
    }
}

impl TableSampler {
    pub fn with_unit(unit: MiUnit) -> Self {
        Self {
            unit,
            ..Self::default()
        }
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        p_y: &[f64],
        num_attributes: usize,
        lo: f64,
        hi: f64,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        let max = self.unit.max_for(p_y.len(), num_attributes);
        if !(lo >= 0.0) || !(lo < hi) || lo > max {
            return Err(Error::InvalidParameter(format!(
                "MI interval [{lo}, {hi}] {} outside [0, {max:.6}]",
                self.unit.label()
            )));
        }
        if self.alpha_grid.is_empty() {
            return Err(Error::InvalidParameter("empty concentration grid".into()));
        }
        let mut attempts = 0usize;
        let draw =
            |alpha: f64, rng: &mut R, attempts: &mut usize| -> Result<Option<Vec<Vec<f64>>>> {
                *attempts += 1;
                let table = dirichlet_rows(p_y.len(), num_attributes, alpha, rng)?;
                let Some(table) = table else { return Ok(None) };
                let mi = self
                    .unit
                    .from_nats(mutual_information(&JointTable::from_conditionals(
                        p_y, &table,
                    )?));
                Ok((lo <= mi && mi <= hi).then_some(table))
            };

        let mut best = (0usize, 0usize);
        for (j, &alpha) in self.alpha_grid.iter().enumerate() {
            let mut hits = 0;
            for _ in 0..self.pilot_draws {
                if draw(alpha, rng, &mut attempts)?.is_some() {
                    hits += 1;
                }
            }
            if hits > best.1 {
                best = (j, hits);
            }
        }
        let center = best.0;
        let neighbours: Vec<f64> = if best.1 > 0 {
            let lo_j = center.saturating_sub(1);
            let hi_j = (center + 1).min(self.alpha_grid.len() - 1);
            self.alpha_grid[lo_j..=hi_j].to_vec()
        } else {
            // nothing accepted in the pilot: sweep the whole grid
            self.alpha_grid.clone()
        };
        let mut i = 0usize;
        while attempts < self.attempt_budget {
            let alpha = neighbours[i % neighbours.len()];
            i += 1;
            if let Some(t) = draw(alpha, rng, &mut attempts)? {
                return Ok(t);
            }
        }
        Err(Error::SamplingBudgetExhausted {
            lo,
            hi,
            unit: self.unit.label(),
            attempts,
        })
    }
}

fn dirichlet_rows<R: Rng + ?Sized>(
    rows: usize,
    k: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<Option<Vec<Vec<f64>>>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut out = Vec::with_capacity(rows);
    for _ in 0..rows {
        let g: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let s: f64 = g.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Ok(None);
        }
        let mut row: Vec<f64> = g.iter().map(|v| v / s).collect();
        // put the rounding residue on the largest entry so rows sum to 1
        let resid = 1.0 - row.iter().sum::<f64>();
        let arg = (0..k)
            .max_by(|&a, &b| row[a].total_cmp(&row[b]))
            .unwrap_or(0);
        row[arg] += resid;
        out.push(row);
    }
    Ok(Some(out))
}

/// Draws a training table P(C | Y) for `dgp` with I(Y;C) in `[lo, hi]` bits.
pub fn sample_correlated_table<R: Rng + ?Sized>(
    dgp: &GaussianDgp,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    TableSampler::default().sample(&dgp.p_y, dgp.num_attributes, lo, hi, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::build_default_gaussian_dgp;
    use crate::rng::seeded;

    fn mi_of(p_y: &[f64], t: &[Vec<f64>]) -> f64 {
        mutual_information(&JointTable::from_conditionals(p_y, t).unwrap())
    }

    #[test]
    fn near_zero_interval_gives_equal_rows() {
        let dgp = build_default_gaussian_dgp(0, 1.0 / 3.0, 60.0).unwrap();
        let t = sample_correlated_table(&dgp, 0.0, 1e-9, &mut seeded(1)).unwrap();
        for k in 0..8 {
            assert!((t[0][k] - t[1][k]).abs() < 1e-4);
        }
    }

    #[test]
    fn high_correlation_interval_in_bits() {
        let dgp = build_default_gaussian_dgp(0, 1.0 / 3.0, 60.0).unwrap();
        for s in 0..5 {
            let t = sample_correlated_table(&dgp, 0.70, 0.80, &mut seeded(s)).unwrap();
            let bits = mi_of(&dgp.p_y, &t) / std::f64::consts::LN_2;
            assert!((0.70..=0.80).contains(&bits), "{bits}");
            for row in &t {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn binary_attribute_in_nats() {
        let s = TableSampler::with_unit(MiUnit::Nats);
        let t = s
            .sample(&[0.5, 0.5], 2, 0.65, 0.70, &mut seeded(3))
            .unwrap();
        let mi = mi_of(&[0.5, 0.5], &t);
        assert!((0.65..=0.70).contains(&mi) && mi <= std::f64::consts::LN_2);
    }

    #[test]
    fn infeasible_interval_rejected() {
        let s = TableSampler::with_unit(MiUnit::Nats);
        assert!(matches!(
            s.sample(&[0.5, 0.5], 8, 0.70, 0.80, &mut seeded(0)),
            Err(Error::InvalidParameter(_))
        ));
        assert!(s.sample(&[0.5, 0.5], 8, 0.3, 0.2, &mut seeded(0)).is_err());
    }

    #[test]
    fn budget_exhaustion_reported() {
        let s = TableSampler {
            attempt_budget: 50,
            pilot_draws: 1,
            alpha_grid: vec![1e6],
            unit: MiUnit::Bits,
        };
        let err = s
            .sample(&[0.5, 0.5], 8, 0.9, 1.0, &mut seeded(0))
            .unwrap_err();
        assert!(matches!(
            err,
            Error::SamplingBudgetExhausted { attempts: 50, .. }
        ));
    }
}
