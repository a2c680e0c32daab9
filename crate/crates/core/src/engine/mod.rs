//! The adaptive group-regularized ridge procedure: an ordinary ridge fit
//! followed by per-partition empirical-Bayes re-penalization steps, each kept
//! only if it raises the cross-validated likelihood.

mod model;
mod pipeline;
mod select;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use model::{predict, CvlEntry, GRridgeModel, PartitionHistory};
pub use pipeline::{fit_pipeline, nested_cv, NestedEvaluation, PipelineConfig};
pub use select::{select_by_margin, select_posthoc, selection_schedule, Selection, SelectionConfig, SelectionPoint};

use crate::codata::isotonic_fit;
use crate::data::{DesignMatrix, Response};
use crate::eb::{
    calibrate, clamp_tau2, solve_system, tau_global, tau_group_iterative, EBSystem, MultiplierSet, TAU2_CLAMP_LOW,
};
use crate::error::{GrridgeError, Result};
use crate::eval::{cvl_matrix, make_folds, FoldPlan};
use crate::partition::{Monotone, Partition};
use crate::ridge::{fit_moments, fit_ridge, FitOptions, PenaltyConfig, RidgeFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EbMethod {
    /// Solve the full G×G moment system.
    System,
    /// Per-group estimates with the other groups held at the global variance.
    #[default]
    Iterative,
}

impl std::str::FromStr for EbMethod {
    type Err = GrridgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "system" => Ok(EbMethod::System),
            "iterative" => Ok(EbMethod::Iterative),
            other => {
                Err(GrridgeError::InvalidArgument(format!("unknown method '{other}' (expected system or iterative)")))
            }
        }
    }
}

impl std::fmt::Display for EbMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EbMethod::System => "system",
            EbMethod::Iterative => "iterative",
        })
    }
}

/// How the CVL fold plan is built. `k = None` means leave-one-out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldConfig {
    pub k: Option<usize>,
    pub seed: u64,
    pub stratify: bool,
}

impl Default for FoldConfig {
    fn default() -> Self {
        Self { k: Some(10), seed: 0, stratify: true }
    }
}

impl FoldConfig {
    /// Builds the plan for a response; `k` larger than n falls back to
    /// leave-one-out.
    pub fn plan(&self, y: &Response) -> Result<FoldPlan> {
        let n = y.len();
        let k = self.k.map_or(n, |k| k.min(n));
        let labels = if self.stratify { y.labels() } else { None };
        make_folds(n, k, labels.as_deref(), self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GRridgeOptions {
    pub method: EbMethod,
    pub max_outer_iters: usize,
    pub folds: FoldConfig,
    /// A step is kept only if it raises CVL by more than this amount.
    pub cvl_tolerance: f64,
    pub selection: Option<SelectionConfig>,
    pub fit: FitOptions,
}

impl Default for GRridgeOptions {
    fn default() -> Self {
        Self {
            method: EbMethod::default(),
            max_outer_iters: 10,
            folds: FoldConfig::default(),
            cvl_tolerance: 0.0,
            selection: None,
            fit: FitOptions::default(),
        }
    }
}

impl GRridgeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 {
            return Err(GrridgeError::InvalidArgument("max_outer_iters must be at least 1".into()));
        }
        if !(self.cvl_tolerance >= 0.0) {
            return Err(GrridgeError::InvalidArgument("cvl_tolerance must be non-negative".into()));
        }
        if let Some(sel) = &self.selection {
            sel.validate()?;
        }
        Ok(())
    }
}

/// One empirical-Bayes re-penalization proposal for a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct EbStep {
    pub set: MultiplierSet,
    pub tau2_global: f64,
    /// Group variances before monotonization and clamping.
    pub raw_tau2: Vec<f64>,
    /// The system route hit a singular α and the iterative route was used.
    pub fell_back: bool,
}

/// Estimates group variances for `partition` at the current fit and turns
/// them into calibrated multipliers. Estimation works on the scaled
/// coefficients `√m_k β_k` of the common-penalty problem, so the returned
/// multipliers act on top of the fit's current ones.
pub fn eb_step(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    fit: &RidgeFit,
    partition: &Partition,
    method: EbMethod,
) -> Result<EbStep> {
    let factors = fit_moments(x, y, fit)?;
    let beta_prime =
        DVector::from_fn(fit.coefficients.len(), |k, _| fit.coefficients[k] * fit.penalty.multipliers[k].sqrt());
    let tau2_global = tau_global(&beta_prime, &factors.variances, &factors)?;
    let mut fell_back = false;
    let raw = match method {
        EbMethod::System => match solve_system(&EBSystem::from_fit(&beta_prime, &factors, partition)?) {
            Ok(t) => t,
            Err(GrridgeError::SingularSystem { .. }) => {
                fell_back = true;
                tau_group_iterative(&beta_prime, &factors.variances, &factors, partition, tau2_global)?
            }
            Err(e) => return Err(e),
        },
        EbMethod::Iterative => tau_group_iterative(&beta_prime, &factors.variances, &factors, partition, tau2_global)?,
    };
    let finite: Vec<f64> = raw.iter().map(|&t| if t.is_finite() { t } else { TAU2_CLAMP_LOW * tau2_global }).collect();
    let shaped = match partition.monotone() {
        Monotone::None => finite,
        dir => {
            let weights: Vec<f64> = partition.sizes().iter().map(|&k| k as f64).collect();
            isotonic_fit(&finite, &weights, dir)
        }
    };
    let (tau2, clamped) = clamp_tau2(&shaped, tau2_global);
    let mut set = calibrate(partition.id(), &tau2, partition.sizes())?;
    set.clamped_groups = clamped;
    Ok(EbStep { set, tau2_global, raw_tau2: raw, fell_back })
}

fn check_partitions(partitions: &[Partition], p: usize) -> Result<()> {
    for (j, part) in partitions.iter().enumerate() {
        if part.n_vars() != p {
            return Err(GrridgeError::InvalidPartition(format!(
                "partition '{}' covers {} variables, design has {p}",
                part.id(),
                part.n_vars()
            )));
        }
        if partitions[..j].iter().any(|q| q.id() == part.id()) {
            return Err(GrridgeError::InvalidPartition(format!("duplicate partition id '{}'", part.id())));
        }
    }
    Ok(())
}

/// Runs the full procedure at a fixed global penalty.
///
/// Partitions are visited in the order given. Each visit proposes new group
/// multipliers (multiplied into the current per-variable multipliers), refits
/// and evaluates CVL. The step is kept if CVL rises above the retained model's
/// CVL by more than `cvl_tolerance`; otherwise it is rolled back and the
/// partition takes no further part. The loop ends when no partition is active
/// or after `max_outer_iters` sweeps.
pub fn grridge(
    x: &DesignMatrix,
    y: &Response,
    partitions: &[Partition],
    lambda: f64,
    opts: &GRridgeOptions,
) -> Result<GRridgeModel> {
    opts.validate()?;
    let (n, p) = (x.n_samples(), x.n_vars());
    if y.len() != n {
        return Err(GrridgeError::DimensionMismatch { what: "response", expected: n, got: y.len() });
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(GrridgeError::InvalidPenalty(format!("lambda must be positive, got {lambda}")));
    }
    check_partitions(partitions, p)?;
    let folds = opts.folds.plan(y)?;
    let xm = x.values();
    let yv = y.values();
    let kind = y.kind();
    let fit_opts = opts.fit;

    let evaluate = |mult: Vec<f64>| -> Result<(RidgeFit, f64)> {
        let penalty = PenaltyConfig::with_multipliers(lambda, mult);
        let fit = fit_ridge(xm, yv, kind, &penalty, &fit_opts)?;
        let cvl = cvl_matrix(xm, yv, kind, &penalty, &folds, &fit_opts)?;
        Ok((fit, cvl))
    };

    let (initial_fit, baseline) = evaluate(vec![1.0; p]).map_err(|e| e.context("initial ridge fit"))?;
    if !baseline.is_finite() {
        return Err(GrridgeError::NonFinite("cross-validated likelihood of the initial fit"));
    }
    let mut trace = vec![CvlEntry { iteration: 0, partition: None, cvl: Some(baseline), accepted: true }];
    let mut histories: Vec<PartitionHistory> = partitions.iter().map(PartitionHistory::new).collect();
    let mut current_fit = initial_fit.clone();
    let mut current_cvl = baseline;

    for iteration in 1..=opts.max_outer_iters {
        if histories.iter().all(|h| !h.active) {
            break;
        }
        for (j, part) in partitions.iter().enumerate() {
            if !histories[j].active {
                continue;
            }
            let ctx = || format!("iteration {iteration}, partition '{}'", part.id());
            let step = eb_step(xm, yv, &current_fit, part, opts.method).map_err(|e| e.context(ctx()))?;
            let step_mult = part.expand(&step.set.group_multipliers)?;
            let mult: Vec<f64> = current_fit.penalty.multipliers.iter().zip(&step_mult).map(|(a, b)| a * b).collect();
            let (fit, cvl) = evaluate(mult).map_err(|e| e.context(ctx()))?;
            let accepted = cvl.is_finite() && cvl > current_cvl + opts.cvl_tolerance;
            trace.push(CvlEntry {
                iteration,
                partition: Some(part.id().to_string()),
                cvl: cvl.is_finite().then_some(cvl),
                accepted,
            });
            let history = &mut histories[j];
            if accepted {
                current_fit = fit;
                current_cvl = cvl;
                history.accept(step);
            } else {
                history.reject(step);
            }
        }
    }

    let mut model = GRridgeModel {
        kind,
        lambda,
        method: opts.method,
        variable_ids: x.variable_ids().to_vec(),
        composed_multipliers: current_fit.penalty.multipliers.clone(),
        final_fit: current_fit,
        initial_fit,
        partitions: histories,
        cvl_trace: trace,
        folds,
        selection: None,
    };
    if let Some(cfg) = &opts.selection {
        let cfg = SelectionConfig { p_max: cfg.p_max.min(p), ..cfg.clone() };
        let folds = model.folds.clone();
        model.selection =
            Some(select_posthoc(&model, x, y, &folds, &cfg).map_err(|e| e.context("post-hoc selection"))?);
    }
    Ok(model)
}

/// Final retained CVL of [`grridge`] for every ordering of the partitions.
/// Meant for checking order sensitivity on a handful of partitions.
pub fn ordering_diagnostics(
    x: &DesignMatrix,
    y: &Response,
    partitions: &[Partition],
    lambda: f64,
    opts: &GRridgeOptions,
) -> Result<Vec<(Vec<String>, f64)>> {
    if partitions.len() > 6 {
        return Err(GrridgeError::InvalidArgument("ordering diagnostics limited to 6 partitions".into()));
    }
    let mut out = Vec::new();
    let mut order: Vec<usize> = (0..partitions.len()).collect();
    loop {
        let parts: Vec<Partition> = order.iter().map(|&i| partitions[i].clone()).collect();
        let model = grridge(x, y, &parts, lambda, &GRridgeOptions { selection: None, ..opts.clone() })?;
        out.push((parts.iter().map(|q| q.id().to_string()).collect(), model.retained_cvl()));
        if !next_permutation(&mut order) {
            break;
        }
    }
    Ok(out)
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap_or(i);
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}
