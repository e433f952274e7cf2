use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid probability table: {0}")]
    InvalidTable(String),

    #[error("no table with I(Y;C) in [{lo}, {hi}] {unit} after {attempts} attempts")]
    SamplingBudgetExhausted {
        lo: f64,
        hi: f64,
        unit: &'static str,
        attempts: usize,
    },

    #[error("no qualifying match for example {0}")]
    NoMatch(usize),

    #[error("matching pool is empty")]
    EmptyPool,

    #[error("counterfactual set has no entry for example {source_idx}, attribute {attribute}")]
    CoverageGap { source_idx: usize, attribute: usize },

    #[error("empty (y={y}, c={c}) cell for an observed example")]
    EmptyCell { y: usize, c: usize },

    #[error("loss became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("group {group} has {size} examples, need at least {needed}")]
    GroupTooSmall {
        group: usize,
        size: usize,
        needed: usize,
    },

    #[error("environment {0} has no examples")]
    EmptyEnvironment(usize),

    #[error("marginal probability of {axis} index {index} is zero")]
    ZeroMarginal { axis: &'static str, index: usize },

    #[error("alphabet mismatch: {0} vs {1}")]
    AlphabetMismatch(usize, usize),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("{path}: row {row}: {message}")]
    Schema {
        path: String,
        row: usize,
        message: String,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("rewriter failed: {0}")]
    Rewriter(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
