use rand::seq::SliceRandom;
use rand::Rng;

use super::review::Review;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub tolerance: f64,
    /// Smallest count kept in each (label, food_mention) cell.
    pub min_cell: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            tolerance: 0.02,
            min_cell: 10,
        }
    }
}

/// Pearson correlation of two binary variables from their 2x2 counts
/// `n[a][b]`; NaN when a margin is empty.
pub fn phi_from_counts(n: [[usize; 2]; 2]) -> f64 {
    let f = |v: usize| v as f64;
    let (n00, n01, n10, n11) = (f(n[0][0]), f(n[0][1]), f(n[1][0]), f(n[1][1]));
    let den = ((n00 + n01) * (n10 + n11) * (n00 + n10) * (n01 + n11)).sqrt();
    (n11 * n00 - n10 * n01) / den
}

/// Correlation between binary label and food mention.
pub fn label_mention_correlation(reviews: &[Review]) -> f64 {
    phi_from_counts(cell_counts(reviews))
}

fn cell_counts(reviews: &[Review]) -> [[usize; 2]; 2] {
    let mut n = [[0usize; 2]; 2];
    for r in reviews {
        n[r.label][r.food_mention] += 1;
    }
    n
}

/// Cell sizes reached by greedily removing single examples, each time from
/// the cell whose removal brings the correlation closest to `target`.
pub fn greedy_cell_targets(
    counts: [[usize; 2]; 2],
    target: f64,
    cfg: &SplitConfig,
) -> Result<[[usize; 2]; 2]> {
    if counts.iter().flatten().any(|&c| c < cfg.min_cell.max(1)) {
        return Err(Error::Infeasible(format!(
            "cell counts {counts:?} below the minimum of {}",
            cfg.min_cell.max(1)
        )));
    }
    let mut m = counts;
    let mut gap = (phi_from_counts(m) - target).abs();
    while gap > cfg.tolerance / 2.0 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..2 {
            for b in 0..2 {
                if m[a][b] <= cfg.min_cell.max(1) {
                    continue;
                }
                let mut t = m;
                t[a][b] -= 1;
                let g = (phi_from_counts(t) - target).abs();
                let better = match best {
                    None => true,
                    Some((bg, ba, bb)) => g < bg || (g == bg && m[a][b] > m[ba][bb]),
                };
                if better {
                    best = Some((g, a, b));
                }
            }
        }
        match best {
            Some((g, a, b)) if g < gap => {
                m[a][b] -= 1;
                gap = g;
            }
            _ => break,
        }
    }
    if gap > cfg.tolerance {
        return Err(Error::Infeasible(format!(
            "correlation {target} unreachable from cells {counts:?} (closest {:.4})",
            phi_from_counts(m)
        )));
    }
    Ok(m)
}

/// Subsample with the given label/food-mention correlation (within the
/// tolerance); which members of a cell survive is random.
pub fn make_spurious_split_with<R: Rng + ?Sized>(
    reviews: &[Review],
    target_corr: f64,
    cfg: &SplitConfig,
    rng: &mut R,
) -> Result<Vec<Review>> {
    if !(-1.0..=1.0).contains(&target_corr) {
        return Err(Error::InvalidParameter(format!(
            "target correlation {target_corr}"
        )));
    }
    let keep = greedy_cell_targets(cell_counts(reviews), target_corr, cfg)?;
    let mut chosen = Vec::new();
    for (a, row) in keep.iter().enumerate() {
        for (b, &k) in row.iter().enumerate() {
            let mut members: Vec<usize> = (0..reviews.len())
                .filter(|&i| reviews[i].label == a && reviews[i].food_mention == b)
                .collect();
            members.shuffle(rng);
            chosen.extend_from_slice(&members[..k]);
        }
    }
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| reviews[i].clone()).collect())
}

pub fn make_spurious_split<R: Rng + ?Sized>(
    reviews: &[Review],
    target_corr: f64,
    rng: &mut R,
) -> Result<Vec<Review>> {
    make_spurious_split_with(reviews, target_corr, &SplitConfig::default(), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::textflow::review::{Ratings, SubRating};
    use crate::textflow::synth::generate_synthetic_pool;
    use proptest::prelude::*;

    fn pool(counts: [[usize; 2]; 2]) -> Vec<Review> {
        let mut out = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                for i in 0..counts[a][b] {
                    let ratings = Ratings {
                        overall: if a == 1 { 4 } else { 2 },
                        food: if b == 1 {
                            SubRating::Positive
                        } else {
                            SubRating::Unknown
                        },
                        service: SubRating::Unknown,
                        noise: SubRating::Unknown,
                        ambiance: SubRating::Unknown,
                    };
                    out.push(Review::new(format!("{a}{b}-{i}"), "", ratings).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn phi_hand_values() {
        assert_eq!(phi_from_counts([[10, 10], [10, 10]]), 0.0);
        assert_eq!(phi_from_counts([[5, 0], [0, 5]]), 1.0);
        // (30*40 - 10*20) / sqrt(40*60*50*50)
        let v = phi_from_counts([[30, 10], [20, 40]]);
        assert!((v - 1000.0 / (40.0f64 * 60.0 * 50.0 * 50.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn balanced_zero_target() {
        let out = make_spurious_split(&pool([[50, 50], [50, 50]]), 0.0, &mut seeded(0)).unwrap();
        assert_eq!(out.len(), 200);
        assert!(label_mention_correlation(&out).abs() <= 0.02);
    }

    #[test]
    fn synthetic_pool_reaches_target() {
        let p = generate_synthetic_pool(1000, &mut seeded(3)).unwrap();
        let out = make_spurious_split(&p, 0.72, &mut seeded(4)).unwrap();
        assert!((label_mention_correlation(&out) - 0.72).abs() <= 0.02);
        assert!(out.len() > 300);
    }

    #[test]
    fn near_perfect_correlation_is_infeasible() {
        let r = make_spurious_split(&pool([[100, 100], [100, 100]]), 0.999, &mut seeded(0));
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    proptest! {
        #[test]
        fn split_is_within_tolerance_or_infeasible(
            n00 in 10usize..120, n01 in 10usize..120, n10 in 10usize..120, n11 in 10usize..120,
            target in -0.8f64..0.8,
        ) {
            let p = pool([[n00, n01], [n10, n11]]);
            match make_spurious_split(&p, target, &mut seeded(1)) {
                Ok(out) => {
                    prop_assert!((label_mention_correlation(&out) - target).abs() <= 0.02 + 1e-12);
                    let n = cell_counts(&out);
                    prop_assert!(n.iter().flatten().all(|&c| c >= 10));
                }
                Err(e) => prop_assert!(matches!(e, Error::Infeasible(_))),
            }
        }
    }
}
