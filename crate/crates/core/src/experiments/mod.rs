//! Batch experiment drivers. Each returns a [`table::Table`] whose rows are in
//! task order and carry enough parameters to regenerate them.

pub mod fixtures;
pub mod roc_compare;
pub mod short_run;
pub mod stability;
pub mod table;

pub use roc_compare::{
    bi_average_two_column, comparison_table, e_closed_form_two_column, roc_comparison, Estimate,
    RocComparisonResult,
};
pub use short_run::{exact_tree_stats, short_run_stats, ShortRunConfig, ShortRunResult};
pub use stability::{
    linear_fit, matrix_perturbation_sweep, prior_perturbation_sweep, ColumnRole, LinearFit,
    MatrixScheme, MatrixSweepConfig, MatrixSweepResult, PriorScheme, PriorSweepConfig,
    PriorSweepResult,
};
pub use table::{format_float, Manifest, Table};
