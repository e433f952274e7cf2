//! Template-based review generator for desk-scale runs.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::review::{Ratings, Review, SubRating};
use crate::error::Result;

const DISHES: [&str; 6] = ["pasta", "burger", "salmon", "risotto", "dumplings", "tacos"];

const FOOD_POS: [&str; 3] = [
    "the {} was delicious",
    "the {} tasted fresh and flavorful",
    "we loved the {}",
];
const FOOD_NEG: [&str; 3] = [
    "the {} was bland",
    "the {} arrived cold and greasy",
    "we could not finish the {}",
];
const SERVICE_POS: [&str; 3] = [
    "our waiter was attentive",
    "the staff were friendly and quick",
    "service was excellent",
];
const SERVICE_NEG: [&str; 3] = [
    "our waiter ignored us",
    "the staff were rude",
    "service was painfully slow",
];
const NOISE_POS: [&str; 2] = [
    "the room was pleasantly quiet",
    "it was quiet enough to talk",
];
const NOISE_NEG: [&str; 2] = [
    "the room was far too loud",
    "the noise made conversation impossible",
];
const AMBIANCE_POS: [&str; 2] = [
    "the decor felt cozy and warm",
    "the lighting and atmosphere were lovely",
];
const AMBIANCE_NEG: [&str; 2] = [
    "the decor felt dated and gloomy",
    "the lighting and atmosphere were depressing",
];
const FILLER: [&str; 3] = [
    "we came on a weekday evening",
    "we visited with friends",
    "parking was easy to find",
];

/// Marker words of each aspect, in [`super::ASPECTS`] order.
pub const ASPECT_KEYWORDS: [&[&str]; 4] = [
    &DISHES,
    &["waiter", "staff", "service"],
    &["quiet", "loud", "noise"],
    &["decor", "lighting", "atmosphere"],
];

/// Index of the aspect a sentence talks about, by marker word.
pub fn sentence_aspect(sentence: &str) -> Option<usize> {
    let lower = sentence.to_ascii_lowercase();
    let words: Vec<&str> = lower.split(|c: char| !c.is_ascii_alphanumeric()).collect();
    ASPECT_KEYWORDS
        .iter()
        .position(|keys| keys.iter().any(|k| words.contains(k)))
}

/// Splits review text into sentences (on `.`, `!`, `?`), trimmed, non-empty.
pub fn sentences(text: &str) -> Vec<String> {
    text.split(['.', '!', '?'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Joins sentences into review text with capitalized starts.
pub fn join_sentences(parts: &[String]) -> String {
    let mut out = String::new();
    for (i, s) in parts.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let mut chars = s.chars();
        if let Some(first) = chars.next() {
            out.extend(first.to_uppercase());
            out.push_str(chars.as_str());
        }
        out.push('.');
    }
    out
}

/// Per-aspect probability that the reviewer comments on it.
const MENTION: [f64; 4] = [0.55, 0.6, 0.35, 0.45];

fn pick<'a, R: Rng + ?Sized>(options: &[&'a str], rng: &mut R) -> &'a str {
    options[rng.random_range(0..options.len())]
}

fn sentence_for<R: Rng + ?Sized>(aspect: usize, rating: SubRating, rng: &mut R) -> String {
    let pos = rating == SubRating::Positive;
    match aspect {
        0 => pick(if pos { &FOOD_POS } else { &FOOD_NEG }, rng).replace("{}", pick(&DISHES, rng)),
        1 => pick(if pos { &SERVICE_POS } else { &SERVICE_NEG }, rng).to_string(),
        2 => pick(if pos { &NOISE_POS } else { &NOISE_NEG }, rng).to_string(),
        _ => pick(if pos { &AMBIANCE_POS } else { &AMBIANCE_NEG }, rng).to_string(),
    }
}

/// Draws `n` reviews. Each aspect is mentioned independently with a fixed
/// probability and a fair positive/negative rating; the overall rating is
/// `round(2.5 + 0.9 s)` clamped to 1..=5, where `s` is the signed count of
/// mentioned aspects plus standard normal noise. Food mention is therefore
/// independent of the label in the pool.
pub fn generate_synthetic_pool<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<Review>> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut subs = [SubRating::Unknown; 4];
        let mut score = rng.sample::<f64, _>(StandardNormal);
        for (a, s) in subs.iter_mut().enumerate() {
            if rng.random::<f64>() < MENTION[a] {
                *s = if rng.random::<bool>() {
                    SubRating::Positive
                } else {
                    SubRating::Negative
                };
                score += if *s == SubRating::Positive { 1.0 } else { -1.0 };
            }
        }
        let overall = (2.5 + 0.9 * score).round().clamp(1.0, 5.0) as u8;
        let mut parts: Vec<String> = (0..4)
            .filter(|&a| subs[a].is_known())
            .map(|a| sentence_for(a, subs[a], rng))
            .collect();
        parts.shuffle(rng);
        if parts.is_empty() || rng.random::<f64>() < 0.4 {
            parts.insert(0, pick(&FILLER, rng).to_string());
        }
        let ratings = Ratings {
            overall,
            food: subs[0],
            service: subs[1],
            noise: subs[2],
            ambiance: subs[3],
        };
        out.push(Review::new(
            format!("syn-{i:05}"),
            join_sentences(&parts),
            ratings,
        )?);
    }
    Ok(out)
}
