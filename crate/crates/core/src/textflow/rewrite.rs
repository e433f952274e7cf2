use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prompt::{parse_prompt, RewriteRequest};
use super::review::Review;
use super::synth::{join_sentences, sentence_aspect, sentences};
use crate::error::{Error, Result};

/// The text-generation boundary: a prompt in, rewritten review text out.
pub trait Rewriter: Sync {
    fn rewrite(&self, prompt: &str) -> Result<String>;

    /// Whether equal prompts always give equal text.
    fn is_deterministic(&self) -> bool;
}

/// Deterministic stand-in for a language model: follows the comparator's
/// sentence skeleton (which aspects appear, in which order) and fills every
/// aspect the original also covers with the original's sentence.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockRewriter;

impl Rewriter for MockRewriter {
    fn rewrite(&self, prompt: &str) -> Result<String> {
        let (original, comparator) = parse_prompt(prompt)
            .ok_or_else(|| Error::Rewriter("prompt does not follow the template".into()))?;
        let own = sentences(&original);
        let out: Vec<String> = sentences(&comparator)
            .into_iter()
            .map(|s| {
                sentence_aspect(&s)
                    .and_then(|a| own.iter().find(|o| sentence_aspect(o) == Some(a)).cloned())
                    .unwrap_or(s)
            })
            .map(|s| s.to_lowercase())
            .collect();
        Ok(join_sentences(&out))
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpRewriterConfig {
    pub endpoint: String,
    pub model: String,
    pub max_tokens: usize,
    pub timeout_secs: u64,
    pub retries: usize,
}

impl Default for HttpRewriterConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            max_tokens: 512,
            timeout_secs: 60,
            retries: 2,
        }
    }
}

/// Posts `{model, prompt, max_tokens}` as JSON and reads `{text}` back.
pub struct HttpRewriter {
    cfg: HttpRewriterConfig,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct HttpRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct HttpResponse {
    text: String,
}

impl HttpRewriter {
    pub fn new(cfg: HttpRewriterConfig) -> Result<Self> {
        if cfg.endpoint.is_empty() {
            return Err(Error::InvalidParameter("rewriter endpoint is empty".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .build()
            .into();
        Ok(Self { cfg, agent })
    }

    fn call(&self, prompt: &str) -> std::result::Result<String, String> {
        let body = HttpRequest {
            model: &self.cfg.model,
            prompt,
            max_tokens: self.cfg.max_tokens,
        };
        let mut resp = self
            .agent
            .post(&self.cfg.endpoint)
            .send_json(&body)
            .map_err(|e| e.to_string())?;
        let parsed: HttpResponse = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        Ok(extract_rewrite(&parsed.text))
    }
}

impl Rewriter for HttpRewriter {
    fn rewrite(&self, prompt: &str) -> Result<String> {
        let mut last = String::new();
        for _ in 0..=self.cfg.retries {
            match self.call(prompt) {
                Ok(t) => return Ok(t),
                Err(e) => last = e,
            }
        }
        Err(Error::Rewriter(format!(
            "{} after {} attempts: {last}",
            self.cfg.endpoint,
            self.cfg.retries + 1
        )))
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}

/// The `rewrite_review: [...]` field of a templated answer, or the whole
/// answer when the model ignored the format.
pub fn extract_rewrite(answer: &str) -> String {
    let key = "rewrite_review: [";
    if let Some(i) = answer.find(key) {
        let rest = &answer[i + key.len()..];
        if let Some(j) = rest.rfind(']') {
            return rest[..j].trim().to_string();
        }
    }
    answer.trim().to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteFailure {
    pub index: usize,
    pub original_id: String,
    pub comparator_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteOutcome {
    /// Augmented reviews in request order (failures omitted).
    pub reviews: Vec<Review>,
    pub failures: Vec<RewriteFailure>,
}

/// Runs every request through the rewriter with at most `max_in_flight`
/// concurrent calls. An augmented review takes the comparator's ratings
/// (hence its label and food mention) and the id `original~comparator`.
pub fn rewrite<W: Rewriter + ?Sized>(
    requests: &[RewriteRequest],
    rewriter: &W,
    max_in_flight: usize,
) -> Result<RewriteOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(max_in_flight.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let results: Vec<Result<String>> = pool.install(|| {
        requests
            .par_iter()
            .map(|r| rewriter.rewrite(&r.prompt))
            .collect()
    });
    let mut out = RewriteOutcome::default();
    for (index, (req, res)) in requests.iter().zip(results).enumerate() {
        let id = format!("{}~{}", req.original.id, req.comparator.id);
        match res.and_then(|text| Review::new(id, text, req.comparator.ratings)) {
            Ok(r) => out.reviews.push(r),
            Err(e) => out.failures.push(RewriteFailure {
                index,
                original_id: req.original.id.clone(),
                comparator_id: req.comparator.id.clone(),
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::textflow::prompt::{assemble_prompt, match_and_assemble, AssembleConfig, MatchMode};
    use crate::textflow::review::{Ratings, SubRating};
    use crate::textflow::synth::generate_synthetic_pool;

    fn review(id: &str, text: &str, food: SubRating) -> Review {
        let ratings = Ratings {
            overall: 4,
            food,
            service: SubRating::Positive,
            noise: SubRating::Unknown,
            ambiance: SubRating::Unknown,
        };
        Review::new(id, text, ratings).unwrap()
    }

    #[test]
    fn mock_splices_skeleton_and_content() {
        let a = review(
            "a",
            "We visited with friends. Our waiter was attentive.",
            SubRating::Unknown,
        );
        let b = review(
            "b",
            "The pasta was delicious. Service was painfully slow.",
            SubRating::Positive,
        );
        let out = MockRewriter.rewrite(&assemble_prompt(&a, &b)).unwrap();
        assert_eq!(out, "The pasta was delicious. Our waiter was attentive.");
        assert!(MockRewriter.rewrite("free text").is_err());
    }

    struct Flaky;
    impl Rewriter for Flaky {
        fn rewrite(&self, prompt: &str) -> Result<String> {
            if prompt.contains("pasta") {
                Err(Error::Rewriter("boom".into()))
            } else {
                MockRewriter.rewrite(prompt)
            }
        }
        fn is_deterministic(&self) -> bool {
            true
        }
    }

    #[test]
    fn failures_are_reported_per_request() {
        let pool = generate_synthetic_pool(200, &mut seeded(2)).unwrap();
        let req = match_and_assemble(&pool, MatchMode::Counterfactual, &AssembleConfig::default())
            .requests;
        let out = rewrite(&req, &Flaky, 3).unwrap();
        assert!(!out.failures.is_empty());
        assert_eq!(out.reviews.len() + out.failures.len(), req.len());
        assert!(out.failures.windows(2).all(|w| w[0].index < w[1].index));
    }

    #[test]
    fn deterministic_and_ordered() {
        let pool = generate_synthetic_pool(300, &mut seeded(5)).unwrap();
        let req = match_and_assemble(&pool, MatchMode::Counterfactual, &AssembleConfig::default())
            .requests;
        let a = rewrite(&req, &MockRewriter, 1).unwrap();
        let b = rewrite(&req, &MockRewriter, 4).unwrap();
        assert_eq!(a, b);
        for (r, q) in a.reviews.iter().zip(&req) {
            assert_eq!(r.id, format!("{}~{}", q.original.id, q.comparator.id));
            assert_eq!(r.label, q.comparator.label);
            assert_eq!(r.food_mention, q.comparator.food_mention);
        }
        assert!(rewrite(&[], &MockRewriter, 2).unwrap().reviews.is_empty());
    }

    #[test]
    fn answer_extraction() {
        assert_eq!(
            extract_rewrite("{\noriginal_review: [x],\nrewrite_review: [Nice place.],\n}"),
            "Nice place."
        );
        assert_eq!(extract_rewrite("  plain text "), "plain text");
        assert!(HttpRewriter::new(HttpRewriterConfig::default()).is_err());
    }
}
