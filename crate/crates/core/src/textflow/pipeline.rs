use std::io::Write;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::bow::Vocabulary;
use super::prompt::{match_and_assemble, AssembleConfig, MatchMode};
use super::review::{ingest_reviews, Review};
use super::rewrite::{
    rewrite, HttpRewriter, HttpRewriterConfig, MockRewriter, RewriteFailure, Rewriter,
};
use super::split::{label_mention_correlation, make_spurious_split};
use super::synth::generate_synthetic_pool;
use crate::error::{Error, Result};
use crate::metrics::Classifier;
use crate::rng::{derive_seed, seeded, SeedPart};
use crate::train::{fit, DenseFeatures, LinearModel, Objective, TrainConfig, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextflowConfig {
    /// Review CSV; a synthetic pool is generated when absent.
    pub reviews_path: Option<PathBuf>,
    pub synthetic_pool: usize,
    /// Reviews assigned to the training side of each random split.
    pub train_size: usize,
    pub target_corr: f64,
    /// Correlation of the held-out evaluation split.
    pub eval_corr: f64,
    pub modes: Vec<MatchMode>,
    pub base_seed: u64,
    pub repetitions: usize,
    pub min_df: usize,
    pub train: TrainConfig,
    pub max_in_flight: usize,
    /// HTTP rewriter; the mock is used when absent.
    pub rewriter: Option<HttpRewriterConfig>,
    pub out_dir: PathBuf,
}

impl Default for TextflowConfig {
    fn default() -> Self {
        Self {
            reviews_path: None,
            synthetic_pool: 1755,
            train_size: 1000,
            target_corr: 0.72,
            eval_corr: 0.0,
            modes: vec![
                MatchMode::Naive,
                MatchMode::Conditional,
                MatchMode::Counterfactual,
            ],
            base_seed: 0,
            repetitions: 5,
            min_df: 2,
            train: TrainConfig::default(),
            max_in_flight: 4,
            rewriter: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl TextflowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter(
                "repetitions must be at least 1".into(),
            ));
        }
        if self.reviews_path.is_none() && self.synthetic_pool <= self.train_size {
            return Err(Error::InvalidParameter(
                "synthetic pool must exceed train_size".into(),
            ));
        }
        for c in [self.target_corr, self.eval_corr] {
            if !(-1.0..=1.0).contains(&c) {
                return Err(Error::InvalidParameter(format!("correlation {c}")));
            }
        }
        self.train.validate()
    }
}

/// Accuracy of one training variant on the held-out split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextflowMetric {
    pub rep: usize,
    /// `none` for the unaugmented baseline, else the matching mode.
    pub mode: String,
    pub n_train: usize,
    pub n_augmented: usize,
    pub n_unmatched: usize,
    pub n_failed: usize,
    pub train_corr: f64,
    pub eval_n: usize,
    pub eval_corr: f64,
    pub eval_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TextflowOutcome {
    pub metrics: Vec<TextflowMetric>,
    /// (rep, mode, review) for every generated review.
    pub augmented: Vec<(usize, MatchMode, Review)>,
    pub failures: Vec<(usize, MatchMode, RewriteFailure)>,
}

struct BowModel {
    vocab: Vocabulary,
    model: LinearModel,
}

impl BowModel {
    fn fit(docs: &[&Review], min_df: usize, cfg: &TrainConfig) -> Result<Self> {
        let vocab = Vocabulary::fit(docs.iter().map(|r| r.text.as_str()), min_df);
        if vocab.is_empty() {
            return Err(Error::InvalidParameter("empty vocabulary".into()));
        }
        let rows: Vec<Vec<f64>> = docs.iter().map(|r| vocab.transform(&r.text)).collect();
        let set = TrainingSet::new(
            DenseFeatures::from_rows(rows.iter().map(Vec::as_slice))?,
            docs.iter().map(|r| r.label).collect(),
            docs.iter().map(|r| r.food_mention).collect(),
        )?;
        Ok(Self {
            model: fit(&set, Objective::Erm, cfg)?,
            vocab,
        })
    }

    fn accuracy(&self, eval: &[Review]) -> f64 {
        let hits = eval
            .iter()
            .filter(|r| self.model.predict(&self.vocab.transform(&r.text)) == r.label)
            .count();
        hits as f64 / eval.len() as f64
    }
}

fn seed(cfg: &TextflowConfig, tag: &str, rep: usize) -> u64 {
    derive_seed(
        cfg.base_seed,
        &[SeedPart::Tag("textflow"), SeedPart::Tag(tag), rep.into()],
    )
}

/// Ingest, split, match, rewrite, then train and evaluate a bag-of-words
/// classifier with and without each kind of augmentation.
pub fn run_textflow(cfg: &TextflowConfig) -> Result<TextflowOutcome> {
    cfg.validate()?;
    let http;
    let rewriter: &dyn Rewriter = match &cfg.rewriter {
        Some(h) => {
            http = HttpRewriter::new(h.clone())?;
            &http
        }
        None => &MockRewriter,
    };
    let ingested = cfg.reviews_path.as_ref().map(ingest_reviews).transpose()?;
    let mut out = TextflowOutcome::default();
    for rep in 0..cfg.repetitions {
        let mut pool = match &ingested {
            Some(r) => r.clone(),
            None => {
                generate_synthetic_pool(cfg.synthetic_pool, &mut seeded(seed(cfg, "pool", rep)))?
            }
        };
        if pool.len() <= cfg.train_size {
            return Err(Error::InvalidParameter(format!(
                "{} reviews cannot fill a training side of {}",
                pool.len(),
                cfg.train_size
            )));
        }
        let mut rng = seeded(seed(cfg, "split", rep));
        pool.shuffle(&mut rng);
        let test_side = pool.split_off(cfg.train_size);
        let train = make_spurious_split(&pool, cfg.target_corr, &mut rng)?;
        let eval = make_spurious_split(&test_side, cfg.eval_corr, &mut rng)?;
        let train_corr = label_mention_correlation(&train);
        let eval_corr = label_mention_correlation(&eval);
        let metric =
            |mode: &str, n_aug: usize, unmatched: usize, failed: usize, model: &BowModel| {
                TextflowMetric {
                    rep,
                    mode: mode.to_string(),
                    n_train: train.len(),
                    n_augmented: n_aug,
                    n_unmatched: unmatched,
                    n_failed: failed,
                    train_corr,
                    eval_n: eval.len(),
                    eval_corr,
                    eval_acc: model.accuracy(&eval),
                }
            };
        let base_docs: Vec<&Review> = train.iter().collect();
        let baseline = BowModel::fit(&base_docs, cfg.min_df, &cfg.train)?;
        out.metrics.push(metric("none", 0, 0, 0, &baseline));
        for &mode in &cfg.modes {
            let assemble = AssembleConfig {
                seed: derive_seed(seed(cfg, "match", rep), &[SeedPart::Tag(mode.label())]),
                per_review: 1,
            };
            let assembled = match_and_assemble(&train, mode, &assemble);
            if assembled.requests.is_empty() {
                continue;
            }
            let rewritten = rewrite(&assembled.requests, rewriter, cfg.max_in_flight)?;
            let mut docs = base_docs.clone();
            docs.extend(rewritten.reviews.iter());
            let model = BowModel::fit(&docs, cfg.min_df, &cfg.train)?;
            out.metrics.push(metric(
                mode.label(),
                rewritten.reviews.len(),
                assembled.unmatched,
                rewritten.failures.len(),
                &model,
            ));
            out.augmented
                .extend(rewritten.reviews.into_iter().map(|r| (rep, mode, r)));
            out.failures
                .extend(rewritten.failures.into_iter().map(|f| (rep, mode, f)));
        }
    }
    Ok(out)
}

/// Mean held-out accuracy per mode, in first-appearance order.
pub fn mean_accuracy_by_mode(metrics: &[TextflowMetric]) -> Vec<(String, f64)> {
    let mut acc: Vec<(String, f64, usize)> = Vec::new();
    for m in metrics {
        match acc.iter_mut().find(|(k, _, _)| *k == m.mode) {
            Some((_, s, n)) => {
                *s += m.eval_acc;
                *n += 1;
            }
            None => acc.push((m.mode.clone(), m.eval_acc, 1)),
        }
    }
    acc.into_iter().map(|(k, s, n)| (k, s / n as f64)).collect()
}

pub fn write_textflow_metrics<W: Write>(writer: W, metrics: &[TextflowMetric]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "rep",
        "mode",
        "n_train",
        "n_augmented",
        "n_unmatched",
        "n_failed",
        "train_corr",
        "eval_n",
        "eval_corr",
        "eval_acc",
    ])?;
    for m in metrics {
        w.write_record([
            m.rep.to_string(),
            m.mode.clone(),
            m.n_train.to_string(),
            m.n_augmented.to_string(),
            m.n_unmatched.to_string(),
            m.n_failed.to_string(),
            m.train_corr.to_string(),
            m.eval_n.to_string(),
            m.eval_corr.to_string(),
            m.eval_acc.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Review CSV columns prefixed with `rep, mode`.
pub fn write_augmented_reviews<W: Write>(
    writer: W,
    rows: &[(usize, MatchMode, Review)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "rep", "mode", "id", "text", "overall", "food", "service", "noise", "ambiance",
    ])?;
    for (rep, mode, r) in rows {
        let a = r.ratings;
        w.write_record([
            rep.to_string().as_str(),
            mode.label(),
            &r.id,
            &r.text,
            &a.overall.to_string(),
            a.food.as_str(),
            a.service.as_str(),
            a.noise.as_str(),
            a.ambiance.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rewrite_failures<W: Write>(
    writer: W,
    rows: &[(usize, MatchMode, RewriteFailure)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "rep",
        "mode",
        "index",
        "original_id",
        "comparator_id",
        "message",
    ])?;
    for (rep, mode, f) in rows {
        w.write_record([
            rep.to_string().as_str(),
            mode.label(),
            &f.index.to_string(),
            &f.original_id,
            &f.comparator_id,
            &f.message,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TextflowConfig {
        TextflowConfig {
            repetitions: 1,
            train: TrainConfig {
                iterations: 300,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_metrics() {
        let a = run_textflow(&small()).unwrap();
        let b = run_textflow(&small()).unwrap();
        assert_eq!(a.metrics, b.metrics);
        let mut x = Vec::new();
        write_textflow_metrics(&mut x, &a.metrics).unwrap();
        let mut y = Vec::new();
        write_textflow_metrics(&mut y, &b.metrics).unwrap();
        assert_eq!(x, y);
        assert_eq!(a.metrics.len(), 4);
        assert!((a.metrics[0].train_corr - 0.72).abs() <= 0.02);
    }

    #[test]
    fn zero_requests_leave_only_the_baseline() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reviews.csv");
        // every review mentions food, so counterfactual matching finds nothing
        let mut pool = generate_synthetic_pool(1755, &mut seeded(9)).unwrap();
        pool.retain(|r| r.food_mention == 1);
        let mut f = std::fs::File::create(&path).unwrap();
        super::super::review::write_reviews(&mut f, &pool).unwrap();
        let cfg = TextflowConfig {
            reviews_path: Some(path),
            train_size: 500,
            target_corr: 0.0,
            modes: vec![MatchMode::Counterfactual],
            ..small()
        };
        // a split needs both food-mention values, so the run fails cleanly
        assert!(matches!(run_textflow(&cfg), Err(Error::Infeasible(_))));
    }
}
