//! Synthetic sweeps, bound reports and their CSV output.

mod config;
mod methods;
mod output;
mod sweep;

pub use config::{mi_buckets, MethodCell, MethodSpec, MiBucket, SweepConfig};
pub use methods::{fit_method, xstar_bayes_accuracy, xstar_bayes_model, zero_one_risk, Fitted};
pub use output::{
    write_bounds, write_errors, write_sweep, BOUNDS_FILE, CORR_SWEEP_FILE, ERRORS_FILE,
    N_SWEEP_FILE,
};
pub use sweep::{
    accuracy_on, augmentation_divergences, method_seed, prepare_cell, renyi_report, run_bounds,
    run_corr_sweep, run_n_sweep, summarize, weighted_zero_one_risk, BoundRow, BoundsOutcome,
    CellData, CellError, CellKey, SweepOutcome, SweepRow, SweepSummary,
};
