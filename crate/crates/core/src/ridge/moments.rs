use nalgebra::{DMatrix, DVector};

use super::fit::{expit, RidgeFit, PROB_CLIP};
use super::solve::{project_out, ScaledSvd};
use crate::data::ResponseKind;
use crate::error::{GrridgeError, Result};

/// Variances below `VARIANCE_FLOOR_REL * median(v)` are clamped to that floor.
pub const VARIANCE_FLOOR_REL: f64 = 1e-12;

/// IRLS weights `p(1-p)` and working response at the point the moments were taken.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingPoint {
    pub weights: DVector<f64>,
    pub response: DVector<f64>,
}

/// The factorization `D = L R` of the scaled bias matrix, with
/// `L = diag(1/√v) (Xw'Xw + 2λI)^{-1} Xw'` (p×n) and `R = Xw` (n×p), together
/// with the approximate coefficient variances `v`.
#[derive(Debug, Clone)]
pub struct MomentFactors {
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    pub variances: DVector<f64>,
    pub lambda: f64,
    /// Variables whose variance was clamped to the floor.
    pub degenerate: Vec<usize>,
    pub working: Option<WorkingPoint>,
}

impl MomentFactors {
    pub fn n_vars(&self) -> usize {
        self.variances.len()
    }

    /// Entry `d_kℓ` of `D = L R`. Materializes one entry only.
    pub fn d(&self, k: usize, l: usize) -> f64 {
        self.left.row(k).dot(&self.right.column(l).transpose())
    }
}

pub fn moment_factors(xw: &DMatrix<f64>, lambda: f64) -> Result<MomentFactors> {
    moment_factors_scaled(xw, lambda, 1.0)
}

/// Moments with a noise-variance factor (σ² for linear response, 1 for the
/// logistic model). Works from the thin SVD `Xw' = U D V'`:
/// `v_k = σ² Σ_j U_kj² d_j² / (d_j² + 2λ)²` and
/// `L = diag(1/√v) U diag(d / (d² + 2λ)) V'`.
pub fn moment_factors_scaled(xw: &DMatrix<f64>, lambda: f64, noise_var: f64) -> Result<MomentFactors> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(GrridgeError::InvalidPenalty(format!("lambda must be positive, got {lambda}")));
    }
    if !(noise_var.is_finite() && noise_var > 0.0) {
        return Err(GrridgeError::InvalidArgument(format!("noise variance must be positive, got {noise_var}")));
    }
    if xw.iter().any(|v| !v.is_finite()) {
        return Err(GrridgeError::NonFinite("weighted design"));
    }
    let p = xw.ncols();
    let svd = ScaledSvd::new(xw, &vec![1.0; p])?;
    let two_l = 2.0 * lambda;
    let shrink = svd.d.map(|d| d / (d * d + two_l));

    // U diag(shrink): p×r
    let mut us = svd.u.clone();
    for (j, mut col) in us.column_iter_mut().enumerate() {
        col *= shrink[j];
    }
    let mut variances = DVector::from_fn(p, |k, _| noise_var * us.row(k).norm_squared());

    let mut sorted: Vec<f64> = variances.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let median = if p % 2 == 1 { sorted[p / 2] } else { 0.5 * (sorted[p / 2 - 1] + sorted[p / 2]) };
    if !(median > 0.0) {
        return Err(GrridgeError::DegenerateVariance(format!("median coefficient variance is {median}")));
    }
    let floor = VARIANCE_FLOOR_REL * median;
    let mut degenerate = Vec::new();
    for (k, v) in variances.iter_mut().enumerate() {
        if *v < floor {
            *v = floor;
            degenerate.push(k);
        }
    }

    let mut left = us * &svd.v_t;
    for (k, mut row) in left.row_iter_mut().enumerate() {
        row /= variances[k].sqrt();
    }
    Ok(MomentFactors { left, right: xw.clone(), variances, lambda, degenerate, working: None })
}

/// Moments of the common-penalty problem behind a generalized ridge fit.
///
/// The design is weighted by the IRLS weights at the fitted coefficients,
/// scaled by `Λ^{-1/2}` and, for an unpenalized intercept, has the weighted
/// intercept column projected out. The returned variances are those of the
/// scaled coefficients `β'_k = √m_k β_k`.
pub fn fit_moments(x: &DMatrix<f64>, y: &DVector<f64>, fit: &RidgeFit) -> Result<MomentFactors> {
    let (n, p) = x.shape();
    if y.len() != n || fit.coefficients.len() != p {
        return Err(GrridgeError::DimensionMismatch { what: "fit moments", expected: p, got: fit.coefficients.len() });
    }
    let eta = fit.linear_predictor(x);
    let (weights, response, noise_var) = match fit.kind {
        ResponseKind::Binary => {
            let prob = eta.map(|e| expit(e).clamp(PROB_CLIP, 1.0 - PROB_CLIP));
            let w = prob.map(|q| q * (1.0 - q));
            let z = DVector::from_fn(n, |i, _| eta[i] + (y[i] - prob[i]) / w[i]);
            (w, z, 1.0)
        }
        ResponseKind::Continuous => (DVector::from_element(n, 1.0), y.clone(), fit.sigma2.unwrap_or(1.0)),
    };
    let s = weights.map(f64::sqrt);
    let mut xw = x.clone();
    for (i, mut row) in xw.row_iter_mut().enumerate() {
        row *= s[i];
    }
    for (k, mut col) in xw.column_iter_mut().enumerate() {
        col /= fit.penalty.multipliers[k].sqrt();
    }
    if fit.penalty.fit_intercept && !fit.penalty.intercept_penalized {
        xw = project_out(&xw, &s, s.norm_squared());
    }
    let mut factors = moment_factors_scaled(&xw, fit.penalty.lambda, noise_var)?;
    factors.working = Some(WorkingPoint { weights, response });
    Ok(factors)
}
