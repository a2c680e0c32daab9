use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::folds::FoldPlan;
use crate::data::{DesignMatrix, Response, ResponseKind};
use crate::error::{GrridgeError, Result};
use crate::ridge::{fit_ridge, FitOptions, PenaltyConfig, RidgeFit, PROB_CLIP};

/// Log-likelihood of held-out samples under a fitted model. Binary fits use
/// the Bernoulli likelihood with clipped probabilities; continuous fits use a
/// Gaussian likelihood with the fit's residual variance.
pub fn heldout_loglik(fit: &RidgeFit, x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let pred = fit.predict(x);
    match fit.kind {
        ResponseKind::Binary => pred
            .iter()
            .zip(y.iter())
            .map(|(&p, &yi)| {
                let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
                if yi == 1.0 {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            })
            .sum(),
        ResponseKind::Continuous => {
            let s2 = fit.sigma2.unwrap_or(f64::NAN);
            pred.iter()
                .zip(y.iter())
                .map(|(&mu, &yi)| -0.5 * (2.0 * PI * s2).ln() - (yi - mu).powi(2) / (2.0 * s2))
                .sum()
        }
    }
}

/// Cross-validated log-likelihood at a fixed penalty: each fold is predicted
/// by a model refit on the remaining samples. Fold refits run in parallel;
/// the per-fold terms are summed in fold order.
pub fn cvl_matrix(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    kind: ResponseKind,
    penalty: &PenaltyConfig,
    folds: &FoldPlan,
    opts: &FitOptions,
) -> Result<f64> {
    let n = x.nrows();
    if folds.n_samples() != n || y.len() != n {
        return Err(GrridgeError::DimensionMismatch { what: "fold plan", expected: n, got: folds.n_samples() });
    }
    let terms: Vec<Result<f64>> = (0..folds.k())
        .into_par_iter()
        .map(|f| {
            let train = folds.train_indices(f);
            let test = folds.test_indices(f);
            let xt = x.select_rows(&train);
            let yt = DVector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
            if kind == ResponseKind::Binary {
                let pos = yt.iter().filter(|v| **v == 1.0).count();
                if pos == 0 || pos == yt.len() {
                    return Err(GrridgeError::InvalidArgument(format!(
                        "training set of fold {} contains a single class",
                        f + 1
                    )));
                }
            }
            let fit = fit_ridge(&xt, &yt, kind, penalty, opts).map_err(|e| e.context(format!("fold {}", f + 1)))?;
            let xv = x.select_rows(&test);
            let yv = DVector::from_iterator(test.len(), test.iter().map(|&i| y[i]));
            Ok(heldout_loglik(&fit, &xv, &yv))
        })
        .collect();
    let mut total = 0.0;
    for t in terms {
        total += t?;
    }
    Ok(total)
}

pub fn cvl(x: &DesignMatrix, y: &Response, penalty: &PenaltyConfig, folds: &FoldPlan) -> Result<f64> {
    cvl_matrix(x.values(), y.values(), y.kind(), penalty, folds, &FitOptions::default())
}

/// `points` values log-spaced over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
}

/// 25 points log-spaced over `[1e-3, 1e6]`.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(1e-3, 1e6, 25)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaTuning {
    pub lambda: f64,
    pub cvl: f64,
    /// `(λ, CVL)` for every grid point, ascending in λ.
    pub grid: Vec<(f64, f64)>,
}

const GOLDEN_STEPS: usize = 12;

/// Maximizes CVL over a grid of global penalties (uniform multipliers), then
/// refines by golden-section search in log λ between the neighbours of the
/// best grid point. Ties go to the larger λ.
pub fn tune_lambda(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    kind: ResponseKind,
    folds: &FoldPlan,
    grid: &[f64],
    opts: &FitOptions,
) -> Result<LambdaTuning> {
    if grid.is_empty() {
        return Err(GrridgeError::InvalidArgument("empty penalty grid".into()));
    }
    if grid.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(GrridgeError::InvalidArgument("penalty grid values must be positive".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let p = x.ncols();
    let eval = |lambda: f64| -> f64 {
        match cvl_matrix(x, y, kind, &PenaltyConfig::uniform(lambda, p), folds, opts) {
            Ok(v) if v.is_finite() => v,
            _ => f64::NEG_INFINITY,
        }
    };
    let values: Vec<f64> = grid.iter().map(|&l| eval(l)).collect();
    let mut best = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b: usize| v >= values[b]) {
            best = Some(i);
        }
    }
    let Some(best) = best else {
        return Err(GrridgeError::InvalidArgument(
            "cross-validated likelihood is not finite at any grid penalty".into(),
        ));
    };
    let mut result = LambdaTuning {
        lambda: grid[best],
        cvl: values[best],
        grid: grid.iter().copied().zip(values.iter().copied()).collect(),
    };
    if grid.len() == 1 {
        return Ok(result);
    }

    let mut a = grid[best.saturating_sub(1)].ln();
    let mut b = grid[(best + 1).min(grid.len() - 1)].ln();
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = eval(c.exp());
    let mut fd = eval(d.exp());
    for _ in 0..GOLDEN_STEPS {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = eval(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = eval(d.exp());
        }
    }
    let (l, v) = if fd >= fc { (d.exp(), fd) } else { (c.exp(), fc) };
    if v > result.cvl {
        result.lambda = l;
        result.cvl = v;
    }
    Ok(result)
}
