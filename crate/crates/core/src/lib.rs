//! Counterfactual data augmentation against spurious correlations.
//!
//! Synthetic data generators with interventions on the spurious attribute,
//! counterfactual estimation (oracle, corrupted, matching, diff-in-diff),
//! linear classifiers trained with several robustness objectives, and the
//! dependence measures and generalization bounds used to compare them.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod augment;
pub mod data;
pub mod dgp;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod rng;
pub mod textflow;
pub mod train;

pub use data::LabeledExample;
pub use error::{Error, Result};
