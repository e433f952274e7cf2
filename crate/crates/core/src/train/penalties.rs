use serde::{Deserialize, Serialize};

use crate::data::LabeledExample;
use crate::error::{Error, Result};
use crate::metrics::JointTable;

/// `w_i = P(y_i) P(c_i) / P(y_i, c_i)` from plug-in frequencies of `(y, c)`.
pub fn reweighting_weights_from_labels(y: &[usize], c: &[usize]) -> Result<Vec<f64>> {
    if y.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: c.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::InvalidParameter("empty dataset".into()));
    }
    let l = y.iter().max().map_or(0, |m| m + 1);
    let k = c.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![vec![0usize; k]; l];
    for (&yi, &ci) in y.iter().zip(c) {
        joint[yi][ci] += 1;
    }
    let n = y.len() as f64;
    let py: Vec<f64> = joint
        .iter()
        .map(|r| r.iter().sum::<usize>() as f64 / n)
        .collect();
    let pc: Vec<f64> = (0..k)
        .map(|j| joint.iter().map(|r| r[j]).sum::<usize>() as f64 / n)
        .collect();
    y.iter()
        .zip(c)
        .map(|(&yi, &ci)| {
            let pj = joint[yi][ci] as f64 / n;
            if pj == 0.0 {
                return Err(Error::EmptyCell { y: yi, c: ci });
            }
            Ok(py[yi] * pc[ci] / pj)
        })
        .collect()
}

pub fn reweighting_weights(data: &[LabeledExample]) -> Result<Vec<f64>> {
    let y: Vec<usize> = data.iter().map(|e| e.y).collect();
    let c: Vec<usize> = data.iter().map(|e| e.c).collect();
    reweighting_weights_from_labels(&y, &c)
}

/// Cell weights `P(y) P(c) / P(y, c)` of a population table.
pub fn reweighting_table(jt: &JointTable) -> Result<Vec<Vec<f64>>> {
    let py = jt.class_marginal();
    let pc = jt.attribute_marginal();
    let mut out = vec![vec![0.0; jt.num_attributes()]; jt.num_classes()];
    for (y, row) in out.iter_mut().enumerate() {
        for (c, w) in row.iter_mut().enumerate() {
            let p = jt.get(y, c);
            if p > 0.0 {
                *w = py[y] * pc[c] / p;
            } else if py[y] * pc[c] > 0.0 {
                return Err(Error::EmptyCell { y, c });
            }
        }
    }
    Ok(out)
}

/// RBF bandwidth choice for the MMD penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Median of pairwise distances among the scores (differentiated through).
    Median,
    Fixed(f64),
}

/// Averaged squared MMD between every pair of groups, its gradient with
/// respect to each score.
pub(crate) fn mmd_value_grad(
    scores: &[f64],
    groups: &[usize],
    weights: &[f64],
    bandwidth: Bandwidth,
    unbiased: bool,
) -> Result<(f64, Vec<f64>)> {
    let n = scores.len();
    if groups.len() != n || weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: groups.len().min(weights.len()),
        });
    }
    let g_max = groups.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; g_max];
    let mut w_sum = vec![0.0; g_max];
    let mut w_sq = vec![0.0; g_max];
    for ((&g, &w), _) in groups.iter().zip(weights).zip(scores) {
        sizes[g] += 1;
        w_sum[g] += w;
        w_sq[g] += w * w;
    }
    let present: Vec<usize> = (0..g_max).filter(|&g| sizes[g] > 0).collect();
    if present.len() < 2 {
        return Err(Error::InvalidParameter(
            "MMD needs at least two groups".into(),
        ));
    }
    let min_size = if unbiased { 2 } else { 1 };
    if let Some(&g) = present.iter().find(|&&g| sizes[g] < min_size) {
        return Err(Error::GroupTooSmall {
            group: g,
            size: sizes[g],
            needed: min_size,
        });
    }
    let n_pairs = (present.len() * (present.len() - 1) / 2) as f64;
    let within_mult = (present.len() - 1) as f64 / n_pairs;

    // bandwidth and the score pair(s) it depends on
    let (h, h_pairs): (f64, Vec<(usize, usize, f64)>) = match bandwidth {
        Bandwidth::Fixed(h) if h > 0.0 => (h, Vec::new()),
        Bandwidth::Fixed(h) => return Err(Error::InvalidParameter(format!("bandwidth {h}"))),
        Bandwidth::Median => {
            let mut d: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    d.push(((scores[i] - scores[j]).abs(), i, j));
                }
            }
            let m = d.len();
            let cmp = |a: &(f64, usize, usize), b: &(f64, usize, usize)| {
                a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
            };
            let mid: Vec<(f64, usize, usize)> = if m % 2 == 1 {
                vec![*d.select_nth_unstable_by(m / 2, cmp).1]
            } else {
                let hi = *d.select_nth_unstable_by(m / 2, cmp).1;
                let lo = *d[..m / 2]
                    .iter()
                    .max_by(|a, b| cmp(a, b))
                    .expect("nonempty");
                vec![lo, hi]
            };
            let h = mid.iter().map(|t| t.0).sum::<f64>() / mid.len() as f64;
            if h > 0.0 {
                let share = 1.0 / mid.len() as f64;
                (h, mid.into_iter().map(|(_, i, j)| (i, j, share)).collect())
            } else {
                // degenerate scores: fall back to unit bandwidth
                (1.0, Vec::new())
            }
        }
    };

    let coef = |a: usize, b: usize, wi: f64, wj: f64| -> f64 {
        if a == b {
            let z = if unbiased {
                w_sum[a] * w_sum[a] - w_sq[a]
            } else {
                w_sum[a] * w_sum[a]
            };
            within_mult * 2.0 * wi * wj / z
        } else {
            -2.0 / n_pairs * wi * wj / (w_sum[a] * w_sum[b])
        }
    };
    let mut value = 0.0;
    if !unbiased {
        for &g in &present {
            value += within_mult * w_sq[g] / (w_sum[g] * w_sum[g]);
        }
    }
    let mut grad = vec![0.0; n];
    let mut dh = 0.0;
    let inv_h2 = 1.0 / (h * h);
    for i in 0..n {
        for j in i + 1..n {
            let c = coef(groups[i], groups[j], weights[i], weights[j]);
            let d = scores[i] - scores[j];
            let k = (-0.5 * d * d * inv_h2).exp();
            value += c * k;
            let gk = c * k * d * inv_h2;
            grad[i] -= gk;
            grad[j] += gk;
            dh += c * k * d * d * inv_h2 / h;
        }
    }
    for (i, j, share) in h_pairs {
        let s = (scores[i] - scores[j]).signum();
        grad[i] += dh * share * s;
        grad[j] -= dh * share * s;
    }
    Ok((value, grad))
}

/// Mean over group pairs of the weighted squared MMD between the score
/// distributions of the groups (RBF kernel).
pub fn mmd_penalty(
    scores: &[f64],
    groups: &[usize],
    weights: &[f64],
    bandwidth: Bandwidth,
    unbiased: bool,
) -> Result<f64> {
    mmd_value_grad(scores, groups, weights, bandwidth, unbiased).map(|(v, _)| v)
}

pub(crate) fn sigmoid(f: f64) -> f64 {
    if f >= 0.0 {
        1.0 / (1.0 + (-f).exp())
    } else {
        let e = f.exp();
        e / (1.0 + e)
    }
}

/// Cross-entropy of a logit for a binary label, computed stably.
pub(crate) fn logistic_loss(f: f64, y: usize) -> f64 {
    f.max(0.0) + (-f.abs()).exp().ln_1p() - if y == 1 { f } else { 0.0 }
}

/// Per-environment gradients of the risk with respect to a scalar multiplier
/// of the logits, at multiplier 1: `G_e = mean_e (sigma(f) - y) f`.
fn irm_scale_gradients(scores: &[f64], y: &[usize], env: &[usize]) -> Result<Vec<(f64, usize)>> {
    let e_max = env.iter().max().map_or(0, |m| m + 1);
    let mut acc = vec![(0.0, 0usize); e_max];
    for ((&f, &yi), &e) in scores.iter().zip(y).zip(env) {
        acc[e].0 += (sigmoid(f) - yi as f64) * f;
        acc[e].1 += 1;
    }
    if let Some(e) = acc.iter().position(|a| a.1 == 0) {
        return Err(Error::EmptyEnvironment(e));
    }
    Ok(acc.into_iter().map(|(s, n)| (s / n as f64, n)).collect())
}

pub(crate) fn irm_value_grad(
    scores: &[f64],
    y: &[usize],
    env: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let g = irm_scale_gradients(scores, y, env)?;
    let value = g.iter().map(|(ge, _)| ge * ge).sum();
    let grad = scores
        .iter()
        .zip(y)
        .zip(env)
        .map(|((&f, &yi), &e)| {
            let (ge, n) = g[e];
            let p = sigmoid(f);
            2.0 * ge / n as f64 * (p * (1.0 - p) * f + p - yi as f64)
        })
        .collect();
    Ok((value, grad))
}

/// `sum_e G_e^2` with environments given by `env` (every index below the
/// largest must be populated).
pub fn irmv1_penalty(scores: &[f64], y: &[usize], env: &[usize]) -> Result<f64> {
    if scores.len() != y.len() || y.len() != env.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: y.len().min(env.len()),
        });
    }
    irm_value_grad(scores, y, env).map(|(v, _)| v)
}

/// Exponentiated-gradient step on the group weights, in log space.
pub fn group_dro_state_update(losses: &[f64], q: &[f64], eta_q: f64) -> Result<Vec<f64>> {
    if losses.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            got: losses.len(),
        });
    }
    if !(eta_q >= 0.0) || losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidParameter(
            "GroupDRO update needs finite losses and eta >= 0".into(),
        ));
    }
    let logits: Vec<f64> = q
        .iter()
        .zip(losses)
        .map(|(&qi, &l)| {
            if qi > 0.0 {
                qi.ln() + eta_q * l
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter("GroupDRO state has no mass".into()));
    }
    let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    Ok(logits.iter().map(|l| (l - m).exp() / z).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn weights_balanced_and_diagonal() {
        let y = [0, 0, 1, 1];
        let c = [0, 1, 0, 1];
        assert_eq!(
            reweighting_weights_from_labels(&y, &c).unwrap(),
            vec![1.0; 4]
        );
        let y = [0, 0, 1, 1];
        let c = [0, 0, 1, 1];
        assert_eq!(
            reweighting_weights_from_labels(&y, &c).unwrap(),
            vec![0.5; 4]
        );
    }

    #[test]
    fn table_weights_zero_cell() {
        let jt = JointTable::new(vec![vec![0.5, 0.0], vec![0.25, 0.25]]).unwrap();
        assert!(matches!(
            reweighting_table(&jt),
            Err(Error::EmptyCell { y: 0, c: 1 })
        ));
    }

    #[test]
    fn mmd_identical_groups() {
        let s = [0.1, -0.4, 2.0, 0.1, -0.4, 2.0];
        let g = [0, 0, 0, 1, 1, 1];
        let w = [1.0; 6];
        let biased = mmd_penalty(&s, &g, &w, Bandwidth::Median, false).unwrap();
        assert!(biased.abs() < 1e-12, "{biased}");
        // unbiased: within terms skip i == j, the cross term does not
        let mut d: Vec<f64> = Vec::new();
        for i in 0..6 {
            for j in i + 1..6 {
                d.push((s[i] - s[j]).abs());
            }
        }
        d.sort_by(f64::total_cmp);
        let h = (d[7] + d[8]) / 2.0;
        let k = |a: f64, b: f64| (-(a - b).powi(2) / (2.0 * h * h)).exp();
        let (mut within, mut cross) = (0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                cross += k(s[i], s[j]);
                if i != j {
                    within += k(s[i], s[j]);
                }
            }
        }
        let expected = 2.0 * within / 6.0 - 2.0 * cross / 9.0;
        let unbiased = mmd_penalty(&s, &g, &w, Bandwidth::Median, true).unwrap();
        assert!(
            (unbiased - expected).abs() < 1e-12,
            "{unbiased} vs {expected}"
        );
    }

    #[test]
    fn mmd_singletons_closed_form() {
        let v = mmd_penalty(
            &[0.3, 1.3],
            &[0, 1],
            &[1.0, 1.0],
            Bandwidth::Fixed(1.0),
            false,
        )
        .unwrap();
        assert!((v - 2.0 * (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        // the median of a single distance is that distance
        let m = mmd_penalty(&[0.3, 1.3], &[0, 1], &[1.0, 1.0], Bandwidth::Median, false).unwrap();
        assert!((m - v).abs() < 1e-15);
        assert!(matches!(
            mmd_penalty(&[0.3, 1.3], &[0, 1], &[1.0, 1.0], Bandwidth::Median, true),
            Err(Error::GroupTooSmall { .. })
        ));
    }

    #[test]
    fn mmd_gradient_matches_differences() {
        let mut rng = seeded(7);
        for unbiased in [true, false] {
            for bw in [Bandwidth::Median, Bandwidth::Fixed(0.7)] {
                let s: Vec<f64> = (0..13).map(|_| rng.random_range(-2.0..2.0)).collect();
                let g: Vec<usize> = (0..13).map(|i| i % 3).collect();
                let w: Vec<f64> = (0..13).map(|_| rng.random_range(0.5..2.0)).collect();
                let (_, grad) = mmd_value_grad(&s, &g, &w, bw, unbiased).unwrap();
                for i in 0..13 {
                    let mut a = s.clone();
                    let mut b = s.clone();
                    a[i] += 1e-6;
                    b[i] -= 1e-6;
                    let fd = (mmd_penalty(&a, &g, &w, bw, unbiased).unwrap()
                        - mmd_penalty(&b, &g, &w, bw, unbiased).unwrap())
                        / 2e-6;
                    assert!(
                        (fd - grad[i]).abs() < 1e-6 * (1.0 + fd.abs()),
                        "{fd} vs {}",
                        grad[i]
                    );
                }
            }
        }
    }

    #[test]
    fn irm_zero_logits() {
        let s = [0.0; 6];
        let y = [0, 1, 0, 1, 0, 1];
        let e = [0, 0, 1, 1, 2, 2];
        assert_eq!(irmv1_penalty(&s, &y, &e).unwrap(), 0.0);
        assert!(matches!(
            irmv1_penalty(&[0.0, 0.0], &[0, 1], &[0, 2]),
            Err(Error::EmptyEnvironment(1))
        ));
    }

    #[test]
    fn irm_single_environment_and_scale_derivative() {
        let s = [0.4, -1.2, 2.5, 0.1];
        let y = [1, 0, 0, 1];
        let e = [0; 4];
        let risk = |t: f64| {
            s.iter()
                .zip(&y)
                .map(|(&f, &yi)| logistic_loss(t * f, yi))
                .sum::<f64>()
                / 4.0
        };
        let fd = (risk(1.0 + 1e-6) - risk(1.0 - 1e-6)) / 2e-6;
        let pen = irmv1_penalty(&s, &y, &e).unwrap();
        assert!(((pen.sqrt() - fd.abs()) / fd.abs()).abs() < 1e-5);
    }

    #[test]
    fn irm_gradient_matches_differences() {
        let mut rng = seeded(8);
        let s: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<usize> = (0..12).map(|i| (i / 2) % 2).collect();
        let e: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let (_, grad) = irm_value_grad(&s, &y, &e).unwrap();
        for i in 0..12 {
            let mut a = s.clone();
            let mut b = s.clone();
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let fd =
                (irmv1_penalty(&a, &y, &e).unwrap() - irmv1_penalty(&b, &y, &e).unwrap()) / 2e-6;
            assert!((fd - grad[i]).abs() < 1e-7 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn dro_update_examples() {
        let q = [0.5, 0.5];
        assert_eq!(
            group_dro_state_update(&[0.3, 0.3], &q, 2.0).unwrap(),
            vec![0.5, 0.5]
        );
        assert_eq!(
            group_dro_state_update(&[1.0, 0.0], &q, 0.0).unwrap(),
            vec![0.5, 0.5]
        );
        let e = std::f64::consts::E;
        let q2 = group_dro_state_update(&[1.0, 0.0], &q, 1.0).unwrap();
        assert!((q2[0] - e / (e + 1.0)).abs() < 1e-15 && (q2[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
        // large losses stay finite in log space
        let q3 = group_dro_state_update(&[1e4, 0.0], &q, 1.0).unwrap();
        assert_eq!(q3, vec![1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn biased_mmd_is_nonnegative(
            s in proptest::collection::vec(-5.0f64..5.0, 2..20),
            seed in 0u64..1000,
        ) {
            let mut rng = seeded(seed);
            let mut g: Vec<usize> = (0..s.len()).map(|_| rng.random_range(0..3)).collect();
            g[0] = 0;
            g[1] = 1;
            let w: Vec<f64> = (0..s.len()).map(|_| rng.random_range(0.1..3.0)).collect();
            let v = mmd_penalty(&s, &g, &w, Bandwidth::Median, false).unwrap();
            prop_assert!(v >= -1e-12);
        }

        #[test]
        fn dro_update_stays_on_simplex(
            losses in proptest::collection::vec(0.0f64..10.0, 4),
            eta in 0.0f64..5.0,
        ) {
            let q = group_dro_state_update(&losses, &[0.1, 0.2, 0.3, 0.4], eta).unwrap();
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(q.iter().all(|&v| v >= 0.0));
        }
    }
}
