//! Fold construction, cross-validated likelihood, global penalty tuning and
//! predictive metrics.

mod cvl;
mod folds;
mod metrics;

pub use cvl::{cvl, cvl_matrix, default_lambda_grid, heldout_loglik, log_grid, tune_lambda, LambdaTuning};
pub use folds::{make_folds, make_folds_in, FoldPlan};
pub use metrics::{brier, roc_auc, write_roc_csv, MetricsReport, Roc};
