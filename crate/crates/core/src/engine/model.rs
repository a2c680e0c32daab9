use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::select::Selection;
use super::{EbMethod, EbStep};
use crate::data::{DesignMatrix, ResponseKind};
use crate::eb::MultiplierSet;
use crate::error::{GrridgeError, Result};
use crate::eval::FoldPlan;
use crate::partition::Partition;

/// One CVL evaluation. Iteration 0 is the initial ridge fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvlEntry {
    pub iteration: usize,
    pub partition: Option<String>,
    /// `None` when the refit produced a non-finite likelihood.
    pub cvl: Option<f64>,
    pub accepted: bool,
}

/// Re-penalization record of one partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionHistory {
    pub partition: Partition,
    pub active: bool,
    /// Calibrated multiplier sets of the accepted steps, in order.
    pub steps: Vec<MultiplierSet>,
    /// Product of the accepted steps' group multipliers.
    pub group_multipliers: Vec<f64>,
    /// The last proposal, accepted or not.
    pub last_proposal: Option<MultiplierSet>,
    /// Steps where the system route fell back to the iterative one.
    #[serde(default)]
    pub fallbacks: usize,
}

impl PartitionHistory {
    pub(super) fn new(partition: &Partition) -> Self {
        Self {
            partition: partition.clone(),
            active: true,
            steps: Vec::new(),
            group_multipliers: vec![1.0; partition.n_groups()],
            last_proposal: None,
            fallbacks: 0,
        }
    }

    pub(super) fn accept(&mut self, step: EbStep) {
        for (c, m) in self.group_multipliers.iter_mut().zip(&step.set.group_multipliers) {
            *c *= m;
        }
        self.record(&step);
        self.steps.push(step.set);
    }

    pub(super) fn reject(&mut self, step: EbStep) {
        self.record(&step);
        self.active = false;
    }

    fn record(&mut self, step: &EbStep) {
        self.fallbacks += usize::from(step.fell_back);
        self.last_proposal = Some(step.set.clone());
    }

    /// Group variances behind the retained multipliers: those of the last
    /// accepted step, if any.
    pub fn retained_tau2(&self) -> Option<&[f64]> {
        self.steps.last().map(|s| s.tau2.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GRridgeModel {
    pub kind: ResponseKind,
    pub lambda: f64,
    pub method: EbMethod,
    pub variable_ids: Vec<String>,
    pub final_fit: crate::ridge::RidgeFit,
    pub initial_fit: crate::ridge::RidgeFit,
    /// Per-variable product of every partition's retained multipliers.
    pub composed_multipliers: Vec<f64>,
    pub partitions: Vec<PartitionHistory>,
    pub cvl_trace: Vec<CvlEntry>,
    pub folds: FoldPlan,
    pub selection: Option<Selection>,
}

impl GRridgeModel {
    /// CVL of the retained model: the last accepted trace entry.
    pub fn retained_cvl(&self) -> f64 {
        self.cvl_trace.iter().rev().find(|e| e.accepted).and_then(|e| e.cvl).unwrap_or(f64::NAN)
    }

    pub fn n_vars(&self) -> usize {
        self.variable_ids.len()
    }

    /// Predictions for a matrix whose columns are the model's variables in
    /// model order. With `use_selection`, the selected submodel is used.
    pub fn predict_matrix(&self, x: &DMatrix<f64>, use_selection: bool) -> Result<DVector<f64>> {
        if x.ncols() != self.n_vars() {
            return Err(GrridgeError::DimensionMismatch {
                what: "prediction columns",
                expected: self.n_vars(),
                got: x.ncols(),
            });
        }
        match (use_selection, &self.selection) {
            (true, Some(sel)) => Ok(sel.fit.predict(&x.select_columns(&sel.indices))),
            (true, None) => Err(GrridgeError::InvalidArgument("model has no selection".into())),
            (false, _) => Ok(self.final_fit.predict(x)),
        }
    }

    /// Predictions with columns matched to the model's variables by id.
    /// Columns not used by the model are ignored.
    pub fn predict(&self, x: &DesignMatrix, use_selection: bool) -> Result<DVector<f64>> {
        let needed: Vec<usize> = match (use_selection, &self.selection) {
            (true, Some(sel)) => sel.indices.clone(),
            (true, None) => return Err(GrridgeError::InvalidArgument("model has no selection".into())),
            (false, _) => (0..self.n_vars()).collect(),
        };
        let lookup: std::collections::HashMap<&str, usize> =
            x.variable_ids().iter().enumerate().map(|(j, id)| (id.as_str(), j)).collect();
        let mut missing = Vec::new();
        let mut cols = vec![0usize; self.n_vars()];
        let mut present = vec![false; self.n_vars()];
        for &k in &needed {
            match lookup.get(self.variable_ids[k].as_str()) {
                Some(&j) => {
                    cols[k] = j;
                    present[k] = true;
                }
                None => missing.push(self.variable_ids[k].clone()),
            }
        }
        if !missing.is_empty() {
            let shown: Vec<&str> = missing.iter().take(5).map(String::as_str).collect();
            return Err(GrridgeError::InvalidArgument(format!(
                "{} model variable(s) missing from new data: {}{}",
                missing.len(),
                shown.join(", "),
                if missing.len() > 5 { ", ..." } else { "" }
            )));
        }
        let xv = x.values();
        let aligned =
            DMatrix::from_fn(x.n_samples(), self.n_vars(), |i, k| if present[k] { xv[(i, cols[k])] } else { 0.0 });
        self.predict_matrix(&aligned, use_selection)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let p = self.n_vars();
        let checks = [
            ("composed multipliers", self.composed_multipliers.len()),
            ("coefficients", self.final_fit.coefficients.len()),
            ("initial coefficients", self.initial_fit.coefficients.len()),
        ];
        for (what, got) in checks {
            if got != p {
                return Err(GrridgeError::DimensionMismatch { what, expected: p, got });
            }
        }
        for h in &self.partitions {
            if h.partition.n_vars() != p {
                return Err(GrridgeError::InvalidPartition(format!(
                    "partition '{}' does not cover the model",
                    h.partition.id()
                )));
            }
        }
        Ok(())
    }
}

/// Predictions of a fitted model; see [`GRridgeModel::predict`].
pub fn predict(model: &GRridgeModel, x: &DesignMatrix, use_selection: bool) -> Result<DVector<f64>> {
    model.predict(x, use_selection)
}
