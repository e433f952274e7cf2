use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::review::{Ratings, Review};
use crate::rng::seeded;

/// Rewrite prompt template, version 1. Placeholders are `{original_*}` and
/// `{compare_*}` for the review text and each rating.
pub const PROMPT_TEMPLATE_V1: &str = include_str!("../../assets/rewrite_prompt.v1.txt");

/// How comparators are chosen for each original review.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Any other review.
    Naive,
    /// Same overall rating and the same four sub-ratings.
    Conditional,
    /// Same overall rating and a different food mention.
    Counterfactual,
}

impl MatchMode {
    pub fn label(self) -> &'static str {
        match self {
            MatchMode::Naive => "naive",
            MatchMode::Conditional => "conditional",
            MatchMode::Counterfactual => "counterfactual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssembleConfig {
    /// Seed of the comparator choice among qualifying candidates.
    pub seed: u64,
    /// Comparators per original review.
    pub per_review: usize,
}

impl Default for AssembleConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            per_review: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteRequest {
    pub original: Review,
    pub comparator: Review,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assembled {
    pub requests: Vec<RewriteRequest>,
    /// Originals without any qualifying comparator.
    pub unmatched: usize,
}

fn fill(prompt: &mut String, prefix: &str, text: &str, r: &Ratings) {
    let subs = [
        ("review", text.to_string()),
        ("overall", r.overall.to_string()),
        ("ambiance", r.ambiance.to_string()),
        ("food", r.food.to_string()),
        ("noise", r.noise.to_string()),
        ("service", r.service.to_string()),
    ];
    for (field, value) in subs {
        *prompt = prompt.replace(&format!("{{{prefix}_{field}}}"), &value);
    }
}

/// The template with both reviews substituted; line breaks inside review
/// text are flattened to spaces.
pub fn assemble_prompt(original: &Review, comparator: &Review) -> String {
    let flat = |s: &str| s.replace(['\r', '\n'], " ").replace('\u{0}', "");
    // the comparator goes first so that its text cannot inject placeholders
    let mut p = PROMPT_TEMPLATE_V1.to_string();
    fill(&mut p, "compare", "\u{0}", &comparator.ratings);
    fill(&mut p, "original", &flat(&original.text), &original.ratings);
    p.replacen('\u{0}', &flat(&comparator.text), 1)
}

/// Extracts the two review texts back out of an assembled prompt.
pub fn parse_prompt(prompt: &str) -> Option<(String, String)> {
    let grab = |start: &str, end: &str| -> Option<String> {
        let i = prompt.find(start)? + start.len();
        let j = prompt[i..].find(end)? + i;
        Some(prompt[i..j].to_string())
    };
    Some((
        grab("original_review: [", "],\noriginal_ratings:")?,
        grab("compare_reviews: [", "]\ncompare_ratings:")?,
    ))
}

fn matches(mode: MatchMode, a: &Review, b: &Review) -> bool {
    match mode {
        MatchMode::Naive => true,
        MatchMode::Conditional => a.ratings == b.ratings,
        MatchMode::Counterfactual => {
            a.ratings.overall == b.ratings.overall && a.food_mention != b.food_mention
        }
    }
}

fn key(mode: MatchMode, r: &Review) -> (u8, [u8; 4], usize) {
    match mode {
        MatchMode::Naive => (0, [0; 4], 0),
        MatchMode::Conditional => (r.ratings.overall, r.ratings.aspects().map(|s| s as u8), 0),
        MatchMode::Counterfactual => (r.ratings.overall, [0; 4], r.food_mention),
    }
}

/// One request per (original, comparator) pair; comparators are drawn
/// without replacement from the qualifying reviews of the pool.
pub fn match_and_assemble(reviews: &[Review], mode: MatchMode, cfg: &AssembleConfig) -> Assembled {
    let mut rng = seeded(cfg.seed);
    let mut buckets: BTreeMap<(u8, [u8; 4], usize), Vec<usize>> = BTreeMap::new();
    for (i, r) in reviews.iter().enumerate() {
        buckets.entry(key(mode, r)).or_default().push(i);
    }
    let mut requests = Vec::new();
    let mut unmatched = 0;
    for (i, original) in reviews.iter().enumerate() {
        let mut candidates: Vec<usize> = match mode {
            MatchMode::Counterfactual => {
                let (o, a, m) = key(mode, original);
                buckets.get(&(o, a, 1 - m)).cloned().unwrap_or_default()
            }
            _ => buckets[&key(mode, original)]
                .iter()
                .copied()
                .filter(|&j| j != i)
                .collect(),
        };
        debug_assert!(candidates
            .iter()
            .all(|&j| matches(mode, original, &reviews[j])));
        if candidates.is_empty() {
            unmatched += 1;
            continue;
        }
        for _ in 0..cfg.per_review.min(candidates.len()) {
            let pick = rng.random_range(0..candidates.len());
            let j = candidates.swap_remove(pick);
            requests.push(RewriteRequest {
                original: original.clone(),
                comparator: reviews[j].clone(),
                prompt: assemble_prompt(original, &reviews[j]),
            });
        }
    }
    Assembled {
        requests,
        unmatched,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textflow::review::SubRating;
    use crate::textflow::synth::generate_synthetic_pool;
    use std::collections::HashSet;

    fn review(id: &str, text: &str, overall: u8, food: SubRating) -> Review {
        let ratings = Ratings {
            overall,
            food,
            service: SubRating::Positive,
            noise: SubRating::Unknown,
            ambiance: SubRating::Negative,
        };
        Review::new(id, text, ratings).unwrap()
    }

    #[test]
    fn prompt_contains_both_reviews_and_ratings() {
        let a = review("a", "The pasta was bland.", 2, SubRating::Negative);
        let b = review(
            "b",
            "Service was excellent {original_review}.",
            4,
            SubRating::Unknown,
        );
        let p = assemble_prompt(&a, &b);
        assert!(p.contains("original_review: [The pasta was bland.],"));
        assert!(p.contains("compare_reviews: [Service was excellent {original_review}.]"));
        assert!(p.contains("rating_food: negative") && p.contains("rating_food: unknown"));
        assert!(p.contains("rating_overall: 2") && p.contains("rating_overall: 4"));
        assert_eq!(p.matches("rating_service: positive").count(), 2);
        assert!(!p.contains("{compare_") && !p.contains("{original_food"));
        assert_eq!(parse_prompt(&p).unwrap(), (a.text.clone(), b.text.clone()));
        assert_eq!(p, assemble_prompt(&a, &b));
    }

    #[test]
    fn conditional_pairs_identical_ratings() {
        let pool = vec![
            review("a", "x", 4, SubRating::Positive),
            review("b", "y", 4, SubRating::Positive),
        ];
        let out = match_and_assemble(&pool, MatchMode::Conditional, &AssembleConfig::default());
        assert_eq!(out.requests.len(), 2);
        assert_eq!(out.requests[0].comparator.id, "b");
        assert_eq!(out.requests[1].comparator.id, "a");
    }

    #[test]
    fn counterfactual_needs_a_different_mention() {
        let pool: Vec<Review> = (0..5)
            .map(|i| review(&i.to_string(), "x", 4, SubRating::Positive))
            .collect();
        let out = match_and_assemble(&pool, MatchMode::Counterfactual, &AssembleConfig::default());
        assert!(out.requests.is_empty());
        assert_eq!(out.unmatched, 5);
    }

    #[test]
    fn full_pool_behaviour() {
        let pool = generate_synthetic_pool(1755, &mut seeded(0)).unwrap();
        let cfg = AssembleConfig::default();
        let cond = match_and_assemble(&pool, MatchMode::Conditional, &cfg);
        assert!(cond.requests.len() < pool.len());
        assert!(cond.unmatched > 0);
        for mode in [
            MatchMode::Naive,
            MatchMode::Conditional,
            MatchMode::Counterfactual,
        ] {
            let out = match_and_assemble(&pool, mode, &cfg);
            let mut seen = HashSet::new();
            for r in &out.requests {
                assert!(matches(mode, &r.original, &r.comparator));
                // symmetric availability under the same key
                assert!(matches(mode, &r.comparator, &r.original));
                assert!(seen.insert((r.original.id.clone(), r.comparator.id.clone())));
            }
            assert_eq!(out.requests.len() + out.unmatched, pool.len());
        }
    }
}
