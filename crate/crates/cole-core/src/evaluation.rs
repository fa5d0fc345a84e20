//! Rank correlation, stratified subsampling, and the cross-validation
//! protocol used to score feature sources.

pub mod cv;
pub mod kendall;
pub mod stratify;

pub use cv::{
    aggregate, read_results_csv, run_cv, write_results_csv, write_summary_json, AggregateRow,
    CvPlan, CvSettings, TrialResult, DEFAULT_BUDGETS,
};
pub use kendall::{kendall_tau, kendall_tau_brute};
pub use stratify::{stratified_sample, stratify_bins};
