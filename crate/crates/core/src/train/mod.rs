//! Binary logistic regression under ERM, augmented ERM, importance
//! reweighting, MMD, IRMv1 and GroupDRO, with analytic gradients.

mod eval;
mod features;
mod fit;
mod model;
mod penalties;

pub use eval::{evaluate, evaluate_classifier, Evaluation, GroupStats};
pub use features::{DenseFeatures, Features, ShiftFeatures};
pub use fit::{fit, fit_with_report, FitReport, Objective, Problem, TrainConfig, TrainingSet};
pub use model::LinearModel;
pub use penalties::{
    group_dro_state_update, irmv1_penalty, mmd_penalty, reweighting_table, reweighting_weights,
    reweighting_weights_from_labels, Bandwidth,
};
