use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::GRridgeModel;
use super::{grridge, GRridgeOptions};
use crate::data::{DesignMatrix, Response, ResponseKind};
use crate::error::{GrridgeError, Result};
use crate::eval::{default_lambda_grid, make_folds_in, tune_lambda, FoldPlan, MetricsReport};
use crate::partition::Partition;

/// Global penalty (fixed or tuned by CVL over `grid`) plus engine options.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub lambda: Option<f64>,
    pub grid: Vec<f64>,
    pub options: GRridgeOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { lambda: None, grid: default_lambda_grid(), options: GRridgeOptions::default() }
    }
}

/// Tunes λ when not fixed, then runs [`grridge`].
pub fn fit_pipeline(
    x: &DesignMatrix,
    y: &Response,
    partitions: &[Partition],
    cfg: &PipelineConfig,
) -> Result<GRridgeModel> {
    let lambda = match cfg.lambda {
        Some(l) => l,
        None => {
            let folds = cfg.options.folds.plan(y)?;
            tune_lambda(x.values(), y.values(), y.kind(), &folds, &cfg.grid, &cfg.options.fit)
                .map_err(|e| e.context("tuning the global penalty"))?
                .lambda
        }
    };
    grridge(x, y, partitions, lambda, &cfg.options)
}

/// Out-of-fold predictions of the whole pipeline (penalty tuning and every
/// re-penalization step rerun on each outer training set), for the
/// group-regularized model and for the ordinary ridge fit it starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedEvaluation {
    pub outer: FoldPlan,
    pub grridge_scores: Vec<f64>,
    pub ridge_scores: Vec<f64>,
    /// Global penalty chosen in each outer fold.
    pub lambdas: Vec<f64>,
}

impl NestedEvaluation {
    /// AUC, ROC and Brier score of both models; binary response only.
    pub fn metrics(&self, y: &Response) -> Result<(MetricsReport, MetricsReport)> {
        let labels =
            y.labels().ok_or_else(|| GrridgeError::InvalidResponse("metrics need a binary response".into()))?;
        Ok((
            MetricsReport::from_predictions(&self.grridge_scores, &labels, None)?,
            MetricsReport::from_predictions(&self.ridge_scores, &labels, None)?,
        ))
    }

    /// Mean squared prediction error of both models.
    pub fn mse(&self, y: &Response) -> (f64, f64) {
        let n = y.len() as f64;
        let err = |s: &[f64]| s.iter().zip(y.values().iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
        (err(&self.grridge_scores), err(&self.ridge_scores))
    }
}

/// Nested cross-validation of the pipeline; `outer_k = None` is leave-one-out.
/// Outer folds come from the `outer-folds` stream of `seed`.
pub fn nested_cv(
    x: &DesignMatrix,
    y: &Response,
    partitions: &[Partition],
    cfg: &PipelineConfig,
    outer_k: Option<usize>,
    seed: u64,
) -> Result<NestedEvaluation> {
    let n = y.len();
    let k = outer_k.map_or(n, |k| k.min(n));
    let labels = if cfg.options.folds.stratify { y.labels() } else { None };
    let outer = make_folds_in(n, k, labels.as_deref(), seed, "outer-folds")?;
    // Per outer fold: test indices, both score vectors and the tuned λ.
    type FoldResult = Result<(Vec<usize>, Vec<f64>, Vec<f64>, f64)>;
    let folds: Vec<FoldResult> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train = outer.train_indices(f);
            let test = outer.test_indices(f);
            let ctx = |e: GrridgeError| e.context(format!("outer fold {}", f + 1));
            let xt = x.select_rows(&train).map_err(ctx)?;
            let yt = y.select(&train).map_err(ctx)?;
            if y.kind() == ResponseKind::Binary && yt.labels().is_some_and(|l| l.iter().all(|&v| v == l[0])) {
                return Err(ctx(GrridgeError::SingleClass));
            }
            let model = fit_pipeline(&xt, &yt, partitions, cfg).map_err(ctx)?;
            let xv = x.values().select_rows(&test);
            let gr = model.final_fit.predict(&xv).iter().copied().collect();
            let ridge = model.initial_fit.predict(&xv).iter().copied().collect();
            Ok((test, gr, ridge, model.lambda))
        })
        .collect();
    let mut grridge_scores = vec![0.0; n];
    let mut ridge_scores = vec![0.0; n];
    let mut lambdas = Vec::with_capacity(k);
    for fold in folds {
        let (test, gr, ridge, lambda) = fold?;
        for (j, &i) in test.iter().enumerate() {
            grridge_scores[i] = gr[j];
            ridge_scores[i] = ridge[j];
        }
        lambdas.push(lambda);
    }
    Ok(NestedEvaluation { outer, grridge_scores, ridge_scores, lambdas })
}
