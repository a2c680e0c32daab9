//! Group-regularized ridge regression with co-data-driven penalties.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codata;
pub mod data;
pub mod eb;
pub mod engine;
pub mod error;
pub mod eval;
pub mod io;
pub mod partition;
pub mod ridge;
pub mod rng;
pub mod simgen;

#[cfg(test)]
mod testutil;

pub use nalgebra;

pub use codata::{CoDataKind, CoDataVector};
pub use data::{DesignMatrix, Response, ResponseKind};
pub use eb::MultiplierSet;
pub use engine::{
    fit_pipeline, grridge, nested_cv, predict, select_posthoc, EbMethod, FoldConfig, GRridgeModel, GRridgeOptions,
    PipelineConfig, SelectionConfig,
};
pub use error::{GrridgeError, Result};
pub use eval::{FoldPlan, MetricsReport};
pub use partition::{Monotone, Partition};
pub use ridge::{FitOptions, PenaltyConfig, RidgeFit};
pub use simgen::{simulate_scenario, SimData, SimScenario, SimTruth};
