use serde::{Deserialize, Serialize};

use super::{Counterfactual, CounterfactualSet, Provenance};
use crate::data::LabeledExample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchMetric {
    /// Euclidean distance after pool-wide per-coordinate standardization.
    EuclideanStandardized,
    /// Only identical keys match (distance 0).
    ExactKey,
}

/// Matching rule. Ties are always broken by the lower pool index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub metric: MatchMetric,
    pub k_neighbors: usize,
    pub caliper: Option<f64>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            metric: MatchMetric::ExactKey,
            k_neighbors: 1,
            caliper: None,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::InvalidParameter(
                "k_neighbors must be positive".into(),
            ));
        }
        if let Some(c) = self.caliper {
            if !(c >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "caliper {c} must be nonnegative"
                )));
            }
        }
        Ok(())
    }
}

/// Matching failures: abort the whole estimate or drop the affected pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoMatchPolicy {
    Fail,
    Drop,
}

fn pool_scale<P: AsRef<[f64]>>(pool: &[P], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = pool.len() as f64;
    let mut mean = vec![0.0; dim];
    for p in pool {
        for (m, v) in mean.iter_mut().zip(p.as_ref()) {
            *m += v / n;
        }
    }
    let mut sd = vec![0.0; dim];
    for p in pool {
        for ((s, v), m) in sd.iter_mut().zip(p.as_ref()).zip(&mean) {
            *s += (v - m).powi(2) / n;
        }
    }
    // constant coordinates are left unscaled
    let sd = sd
        .into_iter()
        .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
        .collect();
    (mean, sd)
}

/// Up to `k_neighbors` pool indices with their distances, nearest first.
pub fn match_examples<P: AsRef<[f64]>>(
    query: &[f64],
    pool: &[P],
    cfg: &MatchConfig,
) -> Result<Vec<(usize, f64)>> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let dim = query.len();
    if let Some(bad) = pool.iter().find(|p| p.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.as_ref().len(),
        });
    }
    let mut hits: Vec<(usize, f64)> = match cfg.metric {
        MatchMetric::ExactKey => pool
            .iter()
            .enumerate()
            .filter(|(_, p)| p.as_ref() == query)
            .map(|(j, _)| (j, 0.0))
            .collect(),
        MatchMetric::EuclideanStandardized => {
            let (_, sd) = pool_scale(pool, dim);
            pool.iter()
                .enumerate()
                .map(|(j, p)| {
                    let d2: f64 = p
                        .as_ref()
                        .iter()
                        .zip(query)
                        .zip(&sd)
                        .map(|((a, b), s)| ((a - b) / s).powi(2))
                        .sum();
                    (j, d2.sqrt())
                })
                .filter(|&(_, d)| cfg.caliper.is_none_or(|c| d <= c))
                .collect()
        }
    };
    hits.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    hits.truncate(cfg.k_neighbors);
    Ok(hits)
}

/// Result of a diff-in-diff pass; `dropped` lists (source, target) pairs
/// without a qualifying match under [`NoMatchPolicy::Drop`].
#[derive(Debug, Clone, PartialEq)]
pub struct DidOutcome {
    pub set: CounterfactualSet,
    pub dropped: Vec<(usize, usize)>,
}

fn check_panel(data: &[LabeledExample], num_attributes: usize) -> Result<()> {
    for (i, ex) in data.iter().enumerate() {
        let (Some(pre), Some(_)) = (&ex.x_pre, &ex.m) else {
            return Err(Error::InvalidParameter(format!(
                "example {i} lacks x_pre or m"
            )));
        };
        if pre.len() != ex.x.len() {
            return Err(Error::DimensionMismatch {
                expected: ex.x.len(),
                got: pre.len(),
            });
        }
        if ex.c >= num_attributes {
            return Err(Error::OutOfRange(format!(
                "attribute {} of example {i}",
                ex.c
            )));
        }
    }
    Ok(())
}

/// Diff-in-diff estimate of `x_i(c)` for every `i` with `c_i != c`:
/// `x_pre,i` plus the mean change `x_j - x_pre,j` over matched units `j`
/// (matched on `m`) that carry attribute `c`.
pub fn diff_in_diff(
    data: &[LabeledExample],
    num_attributes: usize,
    target: usize,
    cfg: &MatchConfig,
    on_missing: NoMatchPolicy,
) -> Result<DidOutcome> {
    if target >= num_attributes {
        return Err(Error::OutOfRange(format!("target attribute {target}")));
    }
    check_panel(data, num_attributes)?;
    cfg.validate()?;
    let pool_idx: Vec<usize> = (0..data.len()).filter(|&j| data[j].c == target).collect();
    let pool_m: Vec<&[f64]> = pool_idx
        .iter()
        .map(|&j| data[j].m.as_deref().unwrap_or(&[]))
        .collect();
    let mut set = CounterfactualSet::originals(data, num_attributes)?;
    let mut dropped = Vec::new();
    for (i, ex) in data.iter().enumerate() {
        if ex.c == target {
            continue;
        }
        let m_i = ex.m.as_deref().unwrap_or(&[]);
        let hits = if pool_m.is_empty() {
            Vec::new()
        } else {
            match_examples(m_i, &pool_m, cfg)?
        };
        if hits.is_empty() {
            match on_missing {
                NoMatchPolicy::Fail => return Err(Error::NoMatch(i)),
                NoMatchPolicy::Drop => {
                    dropped.push((i, target));
                    continue;
                }
            }
        }
        let matches: Vec<usize> = hits.iter().map(|&(p, _)| pool_idx[p]).collect();
        let pre = ex.x_pre.as_deref().unwrap_or(&[]);
        let mut delta = vec![0.0; ex.x.len()];
        for &j in &matches {
            let xj = &data[j].x;
            let prej = data[j].x_pre.as_deref().unwrap_or(&[]);
            for ((d, a), b) in delta.iter_mut().zip(xj).zip(prej) {
                *d += a - b;
            }
        }
        let k = matches.len() as f64;
        let x = pre.iter().zip(&delta).map(|(p, d)| p + d / k).collect();
        set.entries[i][target] = Some(Counterfactual {
            x,
            provenance: Provenance::DiffInDiff { matches },
        });
    }
    Ok(DidOutcome { set, dropped })
}

/// [`diff_in_diff`] for every target attribute.
pub fn diff_in_diff_all(
    data: &[LabeledExample],
    num_attributes: usize,
    cfg: &MatchConfig,
    on_missing: NoMatchPolicy,
) -> Result<DidOutcome> {
    let mut set = CounterfactualSet::originals(data, num_attributes)?;
    let mut dropped = Vec::new();
    for c in 0..num_attributes {
        let out = diff_in_diff(data, num_attributes, c, cfg, on_missing)?;
        set.merge(out.set)?;
        dropped.extend(out.dropped);
    }
    dropped.sort_unstable();
    Ok(DidOutcome { set, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{build_default_gaussian_dgp, sample_panel_dataset};
    use crate::rng::seeded;

    #[test]
    fn exact_query_comes_first() {
        let pool = vec![vec![1.0, 2.0], vec![0.0, 0.0], vec![5.0, 1.0]];
        for metric in [MatchMetric::ExactKey, MatchMetric::EuclideanStandardized] {
            let cfg = MatchConfig {
                metric,
                k_neighbors: 2,
                caliper: None,
            };
            let hits = match_examples(&[0.0, 0.0], &pool, &cfg).unwrap();
            assert_eq!(hits[0], (1, 0.0));
        }
    }

    #[test]
    fn ties_prefer_lower_index() {
        let pool = vec![vec![3.0], vec![1.0], vec![-1.0], vec![1.0]];
        let cfg = MatchConfig {
            metric: MatchMetric::EuclideanStandardized,
            k_neighbors: 4,
            caliper: None,
        };
        let order: Vec<usize> = match_examples(&[0.0], &pool, &cfg)
            .unwrap()
            .iter()
            .map(|h| h.0)
            .collect();
        assert_eq!(order, vec![1, 2, 3, 0]);
    }

    #[test]
    fn hand_computed_order() {
        // pool mean (1, 1), population sd (sqrt(2), sqrt(0.4))
        let pool = vec![
            vec![0.0, 0.0],
            vec![2.0, 1.0],
            vec![1.0, 2.0],
            vec![3.0, 1.0],
            vec![-1.0, 1.0],
        ];
        let q = [0.5, 1.5];
        let (sx, sy) = (2.0f64.sqrt(), 0.4f64.sqrt());
        let mut brute: Vec<(usize, f64)> = pool
            .iter()
            .enumerate()
            .map(|(j, p)| {
                (
                    j,
                    (((p[0] - q[0]) / sx).powi(2) + ((p[1] - q[1]) / sy).powi(2)).sqrt(),
                )
            })
            .collect();
        brute.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let cfg = MatchConfig {
            metric: MatchMetric::EuclideanStandardized,
            k_neighbors: 5,
            caliper: None,
        };
        let got = match_examples(&q, &pool, &cfg).unwrap();
        for (g, b) in got.iter().zip(&brute) {
            assert_eq!(g.0, b.0);
            assert!((g.1 - b.1).abs() < 1e-14);
        }
        assert_eq!(
            got.iter().map(|h| h.0).collect::<Vec<_>>(),
            vec![2, 1, 4, 3, 0]
        );
    }

    #[test]
    fn empty_pool_and_bad_config() {
        let empty: Vec<Vec<f64>> = Vec::new();
        assert!(matches!(
            match_examples(&[0.0], &empty, &MatchConfig::default()),
            Err(Error::EmptyPool)
        ));
        let cfg = MatchConfig {
            caliper: Some(-1.0),
            ..Default::default()
        };
        assert!(match_examples(&[0.0], &[vec![0.0]], &cfg).is_err());
    }

    #[test]
    fn did_recovers_true_counterfactuals() {
        let dgp = build_default_gaussian_dgp(5, 1.0 / 3.0, 60.0).unwrap();
        let data = sample_panel_dataset(&dgp, 800, &mut seeded(6)).unwrap();
        let cfg = MatchConfig {
            metric: MatchMetric::ExactKey,
            k_neighbors: 3,
            caliper: None,
        };
        let out = diff_in_diff_all(&data, 8, &cfg, NoMatchPolicy::Drop).unwrap();
        let mut checked = 0;
        for (i, ex) in data.iter().enumerate() {
            let c_pre = ex.m.as_ref().unwrap()[0] as usize;
            for c in 0..8 {
                let Some(cf) = out.set.get(i, c) else {
                    assert!(out.dropped.contains(&(i, c)));
                    continue;
                };
                let pre = ex.x_pre.as_ref().unwrap();
                let truth: Vec<f64> = if c == ex.c {
                    ex.x.clone()
                } else {
                    let shift = dgp.attribute_shift(c_pre, c);
                    pre[..10]
                        .iter()
                        .cloned()
                        .chain(pre[10..].iter().zip(&shift).map(|(a, b)| a + b))
                        .collect()
                };
                for (a, b) in cf.x.iter().zip(&truth) {
                    assert!((a - b).abs() < 1e-10);
                }
                checked += 1;
            }
        }
        assert!(checked > 800 * 7);
    }

    #[test]
    fn caliper_zero_without_exact_neighbour() {
        let mut a = LabeledExample::new(vec![0.0, 1.0], 0, 0);
        a.m = Some(vec![0.0]);
        a.x_pre = Some(vec![0.0, 0.5]);
        let mut b = LabeledExample::new(vec![1.0, 2.0], 1, 1);
        b.m = Some(vec![1.0]);
        b.x_pre = Some(vec![1.0, 1.0]);
        let cfg = MatchConfig {
            metric: MatchMetric::EuclideanStandardized,
            k_neighbors: 1,
            caliper: Some(0.0),
        };
        let data = vec![a, b];
        assert!(matches!(
            diff_in_diff(&data, 2, 1, &cfg, NoMatchPolicy::Fail),
            Err(Error::NoMatch(0))
        ));
        let out = diff_in_diff(&data, 2, 1, &cfg, NoMatchPolicy::Drop).unwrap();
        assert_eq!(out.dropped, vec![(0, 1)]);
    }

    #[test]
    fn identical_deltas_average_to_single_match() {
        let mk = |c: usize, m: f64, pre: f64| {
            let mut e = LabeledExample::new(vec![pre + 0.5, pre - 1.75], 0, c);
            e.m = Some(vec![m]);
            e.x_pre = Some(vec![pre, pre]);
            e
        };
        let data = vec![mk(0, 1.0, 0.0), mk(1, 1.0, 2.0), mk(1, 1.0, 5.0)];
        let one = MatchConfig {
            metric: MatchMetric::ExactKey,
            k_neighbors: 1,
            caliper: None,
        };
        let two = MatchConfig {
            k_neighbors: 2,
            ..one
        };
        let a = diff_in_diff(&data, 2, 1, &one, NoMatchPolicy::Fail).unwrap();
        let b = diff_in_diff(&data, 2, 1, &two, NoMatchPolicy::Fail).unwrap();
        assert_eq!(a.set.get(0, 1).unwrap().x, b.set.get(0, 1).unwrap().x);
        assert_eq!(
            b.set.get(0, 1).unwrap().provenance,
            Provenance::DiffInDiff {
                matches: vec![1, 2]
            }
        );
    }
}
