use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::GRridgeModel;
use crate::data::{DesignMatrix, Response};
use crate::error::{GrridgeError, Result};
use crate::eval::{cvl_matrix, FoldPlan};
use crate::ridge::{fit_ridge, FitOptions, RidgeFit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub p_max: usize,
    /// Relative CVL margin: the smallest model within `q_marg·|CVL_max|` of
    /// the best is chosen.
    pub q_marg: f64,
    /// Candidate sizes; defaults to [`selection_schedule`].
    #[serde(default)]
    pub schedule: Option<Vec<usize>>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { p_max: 100, q_marg: 0.01, schedule: None }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_max == 0 {
            return Err(GrridgeError::InvalidArgument("p_max must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.q_marg) {
            return Err(GrridgeError::InvalidArgument(format!("q_marg must lie in [0, 1), got {}", self.q_marg)));
        }
        if let Some(s) = &self.schedule {
            if s.is_empty() || s.iter().any(|&v| v == 0 || v > self.p_max) {
                return Err(GrridgeError::InvalidArgument("schedule sizes must lie in 1..=p_max".into()));
            }
        }
        Ok(())
    }

    fn sizes(&self) -> Vec<usize> {
        let mut s = self.schedule.clone().unwrap_or_else(|| selection_schedule(self.p_max));
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// `1, 2, ..., min(25, p_max)`, then steps of 5, always ending at `p_max`.
pub fn selection_schedule(p_max: usize) -> Vec<usize> {
    let mut s: Vec<usize> = (1..=p_max.min(25)).collect();
    let mut next = 30;
    while next < p_max {
        s.push(next);
        next += 5;
    }
    if *s.last().unwrap_or(&0) != p_max {
        s.push(p_max);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPoint {
    pub size: usize,
    pub cvl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Selected variable indices, ascending.
    pub indices: Vec<usize>,
    pub variable_ids: Vec<String>,
    pub fit: RidgeFit,
    pub cvl: f64,
    pub curve: Vec<SelectionPoint>,
    pub config: SelectionConfig,
}

/// Position in `curve` of the smallest size whose CVL is within
/// `q_marg·|CVL_max|` of the maximum. Sizes must be ascending; non-finite
/// entries are skipped.
pub fn select_by_margin(curve: &[(usize, f64)], q_marg: f64) -> Result<usize> {
    let best = curve.iter().map(|c| c.1).filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Err(GrridgeError::InvalidArgument("no finite cross-validated likelihood among candidate sizes".into()));
    }
    let threshold = best - q_marg * best.abs();
    curve
        .iter()
        .position(|c| c.1.is_finite() && c.1 >= threshold)
        .ok_or_else(|| GrridgeError::InvalidArgument("selection threshold not met".into()))
}

/// Post-hoc variable selection: rank variables by `|β̂|`, refit the top-s
/// subsets at the model's λ and per-variable multipliers, and keep the smallest
/// subset whose CVL is within the relative margin of the best.
pub fn select_posthoc(
    model: &GRridgeModel,
    x: &DesignMatrix,
    y: &Response,
    folds: &FoldPlan,
    cfg: &SelectionConfig,
) -> Result<Selection> {
    cfg.validate()?;
    let p = model.n_vars();
    if x.n_vars() != p {
        return Err(GrridgeError::DimensionMismatch { what: "selection design", expected: p, got: x.n_vars() });
    }
    if cfg.p_max > p {
        return Err(GrridgeError::InvalidArgument(format!("p_max {} exceeds the number of variables {p}", cfg.p_max)));
    }
    let beta = &model.final_fit.coefficients;
    let mut ranked: Vec<usize> = (0..p).collect();
    ranked.sort_by(|&a, &b| beta[b].abs().total_cmp(&beta[a].abs()).then(a.cmp(&b)));

    let opts = FitOptions::default();
    let subset = |s: usize| {
        let mut idx = ranked[..s].to_vec();
        idx.sort_unstable();
        idx
    };
    let sizes = cfg.sizes();
    let values: Vec<Result<f64>> = sizes
        .par_iter()
        .map(|&s| {
            let idx = subset(s);
            let xs = x.values().select_columns(&idx);
            let penalty = model.final_fit.penalty.subset(&idx);
            match cvl_matrix(&xs, y.values(), y.kind(), &penalty, folds, &opts) {
                Ok(v) => Ok(v),
                Err(GrridgeError::SingleClass) => Err(GrridgeError::SingleClass),
                Err(_) => Ok(f64::NAN),
            }
        })
        .collect();
    let mut curve = Vec::with_capacity(sizes.len());
    for (&s, v) in sizes.iter().zip(values) {
        curve.push((s, v?));
    }
    let pick = select_by_margin(&curve, cfg.q_marg)?;
    let (size, cvl) = curve[pick];
    let indices = subset(size);
    let xs = x.values().select_columns(&indices);
    let fit = fit_ridge(&xs, y.values(), y.kind(), &model.final_fit.penalty.subset(&indices), &opts)?;
    Ok(Selection {
        variable_ids: indices.iter().map(|&k| model.variable_ids[k].clone()).collect(),
        indices,
        fit,
        cvl,
        curve: curve.into_iter().map(|(size, v)| SelectionPoint { size, cvl: v.is_finite().then_some(v) }).collect(),
        config: cfg.clone(),
    })
}
