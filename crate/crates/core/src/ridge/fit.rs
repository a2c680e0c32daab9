use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::solve::{ridge_solve_with_intercept, InterceptSolve, PenaltyConfig, ScaledKernel};
use crate::data::{DesignMatrix, Response, ResponseKind};
use crate::error::{GrridgeError, Result};

/// Fitted probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]` when
/// forming IRLS weights and the working response.
pub const PROB_CLIP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Convergence threshold on the largest absolute coefficient change.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub kind: ResponseKind,
    #[serde(with = "vector_serde")]
    pub coefficients: DVector<f64>,
    pub intercept: f64,
    pub penalty: PenaltyConfig,
    pub converged: bool,
    pub iterations: usize,
    pub penalized_loglik: f64,
    /// Residual variance `RSS / (n - tr H)`; only set for continuous response.
    pub sigma2: Option<f64>,
}

impl RidgeFit {
    pub fn linear_predictor(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut eta = x * &self.coefficients;
        eta.add_scalar_mut(self.intercept);
        eta
    }

    /// Probabilities for binary fits, the linear predictor otherwise.
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let eta = self.linear_predictor(x);
        match self.kind {
            ResponseKind::Binary => eta.map(expit),
            ResponseKind::Continuous => eta,
        }
    }
}

mod vector_serde {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Vec::<f64>::deserialize(d).map(DVector::from_vec)
    }
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Bernoulli log-likelihood minus `λ Σ m_k β_k²`; the intercept is penalized
/// only when the penalty says so.
pub fn binary_penalized_loglik(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    intercept: f64,
    beta: &DVector<f64>,
    penalty: &PenaltyConfig,
) -> f64 {
    let mut eta = x * beta;
    eta.add_scalar_mut(intercept);
    let ll: f64 = eta.iter().zip(y.iter()).map(|(e, yi)| yi * e - softplus(*e)).sum();
    ll - penalty_term(intercept, beta, penalty)
}

fn penalty_term(intercept: f64, beta: &DVector<f64>, penalty: &PenaltyConfig) -> f64 {
    let mut pen: f64 = beta.iter().zip(&penalty.multipliers).map(|(b, m)| m * b * b).sum();
    if penalty.fit_intercept && penalty.intercept_penalized {
        pen += intercept * intercept;
    }
    penalty.lambda * pen
}

/// Solves the generalized ridge problem with design `diag(s) X`, response
/// `zw` and intercept column `s`: through the kernel when one is given and
/// well conditioned, through the SVD of the scaled design otherwise.
fn weighted_solve(
    x: &DMatrix<f64>,
    kernel: Option<&ScaledKernel>,
    s: &DVector<f64>,
    zw: &DVector<f64>,
    penalty: &PenaltyConfig,
    with_trace: bool,
) -> Result<InterceptSolve> {
    if let Some(k) = kernel {
        if s.iter().chain(zw.iter()).all(|v| v.is_finite()) {
            if let Ok((sol, true)) = k.solve(s, zw, penalty, with_trace) {
                return Ok(sol);
            }
        }
    }
    let mut xw = x.clone();
    for (i, mut row) in xw.row_iter_mut().enumerate() {
        row *= s[i];
    }
    ridge_solve_with_intercept(&xw, s, zw, penalty)
}

/// Penalized logistic ridge by Newton-Raphson (IRLS). Starts from β = 0 with
/// the intercept at `logit(ȳ)`; a step that lowers the penalized likelihood is
/// halved up to 30 times. Non-convergence within `max_iter` is reported through
/// `converged = false`, not as an error.
pub fn fit_binary(x: &DMatrix<f64>, y: &DVector<f64>, penalty: &PenaltyConfig, opts: &FitOptions) -> Result<RidgeFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(GrridgeError::DimensionMismatch { what: "response", expected: n, got: y.len() });
    }
    if !(opts.tol > 0.0) {
        return Err(GrridgeError::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    penalty.validate(p)?;
    if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(GrridgeError::InvalidResponse("binary fit needs 0/1 response".into()));
    }
    let ybar = y.mean();
    if ybar == 0.0 || ybar == 1.0 {
        return Err(GrridgeError::SingleClass);
    }

    let mut intercept = if penalty.fit_intercept { logit(ybar) } else { 0.0 };
    let mut beta = DVector::zeros(p);
    let kernel = (n < p).then(|| ScaledKernel::new(x, &penalty.multipliers));
    let mut obj = binary_penalized_loglik(x, y, intercept, &beta, penalty);
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=opts.max_iter {
        iterations = it;
        let mut eta = x * &beta;
        eta.add_scalar_mut(intercept);
        let prob = eta.map(|e| expit(e).clamp(PROB_CLIP, 1.0 - PROB_CLIP));
        let w = prob.map(|q| q * (1.0 - q));
        let s = w.map(f64::sqrt);
        let z = DVector::from_fn(n, |i, _| eta[i] + (y[i] - prob[i]) / w[i]);

        let zw = z.component_mul(&s);
        let step = weighted_solve(x, kernel.as_ref(), &s, &zw, penalty, false)?;

        let (mut new_b0, mut new_beta) = (step.intercept, step.beta);
        let mut new_obj = binary_penalized_loglik(x, y, new_b0, &new_beta, penalty);
        let mut halvings = 0;
        while !(new_obj >= obj - 1e-12 * obj.abs()) && halvings < 30 {
            new_b0 = 0.5 * (new_b0 + intercept);
            new_beta = (&new_beta + &beta) * 0.5;
            new_obj = binary_penalized_loglik(x, y, new_b0, &new_beta, penalty);
            halvings += 1;
        }
        if !new_obj.is_finite() || new_beta.iter().any(|b| !b.is_finite()) {
            return Err(GrridgeError::NonFinite("IRLS iterate"));
        }

        let change = (&new_beta - &beta).amax().max((new_b0 - intercept).abs());
        beta = new_beta;
        intercept = new_b0;
        obj = new_obj;
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    Ok(RidgeFit {
        kind: ResponseKind::Binary,
        coefficients: beta,
        intercept,
        penalty: penalty.clone(),
        converged,
        iterations,
        penalized_loglik: obj,
        sigma2: None,
    })
}

/// Linear ridge: a single generalized-ridge solve with unit weights.
/// `penalized_loglik` holds `-RSS/2 - λ Σ m_k β_k²`, the criterion the solve
/// maximizes.
pub fn fit_continuous(x: &DMatrix<f64>, y: &DVector<f64>, penalty: &PenaltyConfig) -> Result<RidgeFit> {
    let n = x.nrows();
    if y.len() != n {
        return Err(GrridgeError::DimensionMismatch { what: "response", expected: n, got: y.len() });
    }
    penalty.validate(x.ncols())?;
    let ones = DVector::from_element(n, 1.0);
    let kernel = (n < x.ncols()).then(|| ScaledKernel::new(x, &penalty.multipliers));
    let sol = weighted_solve(x, kernel.as_ref(), &ones, y, penalty, true)?;
    let mut fitted = x * &sol.beta;
    fitted.add_scalar_mut(sol.intercept);
    let rss = (y - fitted).norm_squared();
    let dof = n as f64 - sol.hat_trace;
    if !(dof > 0.0) {
        return Err(GrridgeError::InvalidArgument(format!("no residual degrees of freedom (n - tr H = {dof})")));
    }
    let obj = -0.5 * rss - penalty_term(sol.intercept, &sol.beta, penalty);
    Ok(RidgeFit {
        kind: ResponseKind::Continuous,
        coefficients: sol.beta,
        intercept: sol.intercept,
        penalty: penalty.clone(),
        converged: true,
        iterations: 1,
        penalized_loglik: obj,
        sigma2: Some(rss / dof),
    })
}

pub fn fit_ridge(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    kind: ResponseKind,
    penalty: &PenaltyConfig,
    opts: &FitOptions,
) -> Result<RidgeFit> {
    match kind {
        ResponseKind::Binary => fit_binary(x, y, penalty, opts),
        ResponseKind::Continuous => fit_continuous(x, y, penalty),
    }
}

pub fn irls_fit(x: &DesignMatrix, y: &Response, penalty: &PenaltyConfig, opts: &FitOptions) -> Result<RidgeFit> {
    if y.kind() != ResponseKind::Binary {
        return Err(GrridgeError::InvalidResponse("logistic fit needs a binary response".into()));
    }
    fit_binary(x.values(), y.values(), penalty, opts)
}

pub fn linear_fit(x: &DesignMatrix, y: &Response, penalty: &PenaltyConfig) -> Result<RidgeFit> {
    if y.kind() != ResponseKind::Continuous {
        return Err(GrridgeError::InvalidResponse("linear fit needs a continuous response".into()));
    }
    fit_continuous(x.values(), y.values(), penalty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_binary, random_matrix, random_vector, rel_err};

    fn gradient(x: &DMatrix<f64>, y: &DVector<f64>, fit: &RidgeFit) -> (f64, DVector<f64>) {
        let prob = fit.predict(x);
        let resid = y - prob;
        let mut g = x.tr_mul(&resid);
        for k in 0..g.len() {
            g[k] -= 2.0 * fit.penalty.lambda * fit.penalty.multipliers[k] * fit.coefficients[k];
        }
        (resid.sum(), g)
    }

    #[test]
    fn penalty_dominated_limit() {
        let x = random_matrix(30, 5, 7);
        let y = random_binary(30, 8);
        let fit = fit_binary(&x, &y, &PenaltyConfig::uniform(1e10, 5), &FitOptions::default()).unwrap();
        assert!(fit.coefficients.amax() < 1e-6);
        assert!((fit.intercept - logit(y.mean())).abs() < 1e-3);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = random_matrix(6, 2, 1);
        let y = DVector::zeros(6);
        let err = fit_binary(&x, &y, &PenaltyConfig::uniform(1.0, 2), &FitOptions::default()).unwrap_err();
        assert_eq!(err.to_string(), "single-class response");
    }

    #[test]
    fn stationary_at_convergence() {
        let x = random_matrix(20, 3, 11);
        let y = random_binary(20, 12);
        let fit = fit_binary(&x, &y, &PenaltyConfig::uniform(1.0, 3), &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let (g0, g) = gradient(&x, &y, &fit);
        assert!(g0.abs() < 1e-6 && g.amax() < 1e-6, "gradient {g0} {g}");
    }

    #[test]
    fn wide_problem_converges() {
        let x = random_matrix(40, 300, 17);
        let y = random_binary(40, 18);
        let fit = fit_binary(&x, &y, &PenaltyConfig::uniform(0.5, 300), &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let (g0, g) = gradient(&x, &y, &fit);
        assert!(g0.abs() < 1e-6 && g.amax() < 1e-6);
    }

    #[test]
    fn linear_identity_closed_form() {
        let x = DMatrix::identity(2, 2);
        let y = DVector::from_vec(vec![1.0, 0.0]);
        let fit = fit_continuous(&x, &y, &PenaltyConfig::uniform(0.5, 2).without_intercept()).unwrap();
        assert!((fit.coefficients[0] - 0.5).abs() < 1e-15 && fit.coefficients[1].abs() < 1e-15);
        assert_eq!(fit.intercept, 0.0);
    }

    #[test]
    fn linear_fit_dense_oracle_and_limit() {
        let x = random_matrix(10, 30, 31);
        let y = random_vector(10, 32);
        let fit = fit_continuous(&x, &y, &PenaltyConfig::uniform(0.8, 30)).unwrap();
        // Centred dense oracle.
        let xm = DVector::from_fn(30, |k, _| x.column(k).mean());
        let xc = DMatrix::from_fn(10, 30, |i, k| x[(i, k)] - xm[k]);
        let yc = y.add_scalar(-y.mean());
        let mut lhs = xc.transpose() * &xc;
        for k in 0..30 {
            lhs[(k, k)] += 1.6;
        }
        let oracle = lhs.lu().solve(&(xc.transpose() * yc)).unwrap();
        assert!(rel_err(&fit.coefficients, &oracle) < 1e-8);
        assert!((fit.intercept - (y.mean() - xm.dot(&oracle))).abs() < 1e-10);
        assert!(fit.sigma2.unwrap() > 0.0);

        let big = fit_continuous(&x, &y, &PenaltyConfig::uniform(1e12, 30)).unwrap();
        assert!(big.coefficients.norm() < 1e-6);
        assert!((big.intercept - y.mean()).abs() < 1e-6);
    }

    #[test]
    fn sigma2_uses_effective_dof() {
        let x = random_matrix(15, 4, 41);
        let y = random_vector(15, 42);
        let lambda = 0.4;
        let fit = fit_continuous(&x, &y, &PenaltyConfig::uniform(lambda, 4)).unwrap();
        // Hat matrix of the augmented dense system with unpenalized intercept.
        let mut aug = DMatrix::from_element(15, 5, 1.0);
        aug.columns_mut(1, 4).copy_from(&x);
        let mut lhs = aug.transpose() * &aug;
        for k in 1..5 {
            lhs[(k, k)] += 2.0 * lambda;
        }
        let hat = &aug * lhs.try_inverse().unwrap() * aug.transpose();
        let fitted = &hat * &y;
        let rss = (&y - fitted).norm_squared();
        let expected = rss / (15.0 - hat.trace());
        assert!((fit.sigma2.unwrap() - expected).abs() < 1e-10 * expected);
    }
}
