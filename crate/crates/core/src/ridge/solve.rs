use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GrridgeError, Result};

/// Largest condition number of the penalized n×n core accepted by the solver.
pub const MAX_CORE_CONDITION: f64 = 1e14;

/// Global penalty λ with per-variable multipliers (the diagonal of Λ).
///
/// The penalty on coefficient k is `lambda * multipliers[k] * beta_k^2`, so the
/// normal equations read `(X'X + 2λΛ) β = X'z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda: f64,
    pub multipliers: Vec<f64>,
    #[serde(default)]
    pub intercept_penalized: bool,
    #[serde(default = "default_true")]
    pub fit_intercept: bool,
}

fn default_true() -> bool {
    true
}

impl PenaltyConfig {
    pub fn uniform(lambda: f64, p: usize) -> Self {
        Self::with_multipliers(lambda, vec![1.0; p])
    }

    pub fn with_multipliers(lambda: f64, multipliers: Vec<f64>) -> Self {
        Self { lambda, multipliers, intercept_penalized: false, fit_intercept: true }
    }

    pub fn without_intercept(mut self) -> Self {
        self.fit_intercept = false;
        self
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(GrridgeError::InvalidPenalty(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if self.multipliers.len() != p {
            return Err(GrridgeError::DimensionMismatch {
                what: "penalty multipliers",
                expected: p,
                got: self.multipliers.len(),
            });
        }
        if let Some((k, m)) = self.multipliers.iter().enumerate().find(|(_, m)| !(m.is_finite() && **m > 0.0)) {
            return Err(GrridgeError::InvalidPenalty(format!("multiplier {k} must be positive and finite, got {m}")));
        }
        Ok(())
    }

    /// Restricts the multipliers to a subset of variables.
    pub fn subset(&self, vars: &[usize]) -> Self {
        Self {
            lambda: self.lambda,
            multipliers: vars.iter().map(|&k| self.multipliers[k]).collect(),
            intercept_penalized: self.intercept_penalized,
            fit_intercept: self.fit_intercept,
        }
    }
}

/// Thin SVD of the column-scaled design transpose, `(X Λ^{-1/2})' = U D V'`.
pub(crate) struct ScaledSvd {
    pub u: DMatrix<f64>,
    pub d: DVector<f64>,
    pub v_t: DMatrix<f64>,
    pub inv_sqrt_mult: DVector<f64>,
    pub full_rank: bool,
}

impl ScaledSvd {
    pub fn new(x: &DMatrix<f64>, multipliers: &[f64]) -> Result<Self> {
        let inv_sqrt_mult = DVector::from_iterator(multipliers.len(), multipliers.iter().map(|m| 1.0 / m.sqrt()));
        let mut scaled_t = x.transpose();
        for (k, mut row) in scaled_t.row_iter_mut().enumerate() {
            row *= inv_sqrt_mult[k];
        }
        let (p, n) = scaled_t.shape();
        let (u, d, v_t) = thin_svd(&scaled_t)?;
        Ok(Self { u, d, v_t, inv_sqrt_mult, full_rank: p <= n })
    }

    pub fn condition(&self, lambda: f64) -> f64 {
        let two_l = 2.0 * lambda;
        let dmax = self.d.iter().fold(0.0_f64, |a, &b| a.max(b));
        let dmin = if self.full_rank { self.d.iter().fold(f64::INFINITY, |a, &b| a.min(b)) } else { 0.0 };
        (dmax * dmax + two_l) / (dmin * dmin + two_l)
    }

    pub fn check_condition(&self, lambda: f64) -> Result<()> {
        let condition = self.condition(lambda);
        if !condition.is_finite() || condition > MAX_CORE_CONDITION {
            return Err(GrridgeError::SingularCore { condition });
        }
        Ok(())
    }

    /// Solves `(X'X + 2λΛ) β = X'z` and returns β on the original scale.
    pub fn solve(&self, z: &DVector<f64>, lambda: f64) -> DVector<f64> {
        let two_l = 2.0 * lambda;
        let mut coef = &self.v_t * z;
        for (j, c) in coef.iter_mut().enumerate() {
            let d = self.d[j];
            *c *= d / (d * d + two_l);
        }
        let beta_scaled = &self.u * coef;
        beta_scaled.component_mul(&self.inv_sqrt_mult)
    }

    /// Trace of the penalized hat matrix of the scaled design.
    pub fn hat_trace(&self, lambda: f64) -> f64 {
        let two_l = 2.0 * lambda;
        self.d.iter().map(|d| d * d / (d * d + two_l)).sum()
    }
}

/// Thin SVD `A = U D V'` of a p×n matrix, from the symmetric eigendecomposition
/// of the smaller Gram matrix. nalgebra's bidiagonal SVD returns wrong singular
/// vectors when a singular value is exactly zero, which happens whenever an
/// intercept is profiled out of a design with p ≥ n. Singular values at the
/// rounding level of the Gram matrix are set to zero along with their vectors.
fn thin_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (p, n) = a.shape();
    let tall = p >= n;
    let gram = if tall { a.tr_mul(a) } else { a * a.transpose() };
    let eig = SymmetricEigen::try_new(gram, f64::EPSILON, 0)
        .ok_or_else(|| GrridgeError::InvalidArgument("eigendecomposition failed to converge".into()))?;
    let top = eig.eigenvalues.iter().fold(0.0_f64, |m, &e| m.max(e));
    let cutoff = top * p.max(n) as f64 * f64::EPSILON;
    let d = eig.eigenvalues.map(|e| if e > cutoff { e.sqrt() } else { 0.0 });
    let inv_d = d.map(|s| if s > 0.0 { 1.0 / s } else { 0.0 });
    let vecs = eig.eigenvectors;
    if tall {
        let mut u = a * &vecs;
        for (j, mut col) in u.column_iter_mut().enumerate() {
            col *= inv_d[j];
        }
        Ok((u, d, vecs.transpose()))
    } else {
        let mut v_t = vecs.tr_mul(a);
        for (j, mut row) in v_t.row_iter_mut().enumerate() {
            row *= inv_d[j];
        }
        Ok((vecs, d, v_t))
    }
}

fn check_inputs(xw: &DMatrix<f64>, z: &DVector<f64>, penalty: &PenaltyConfig) -> Result<()> {
    if z.len() != xw.nrows() {
        return Err(GrridgeError::DimensionMismatch { what: "working response", expected: xw.nrows(), got: z.len() });
    }
    penalty.validate(xw.ncols())?;
    if xw.iter().any(|v| !v.is_finite()) {
        return Err(GrridgeError::NonFinite("weighted design"));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(GrridgeError::NonFinite("working response"));
    }
    Ok(())
}

/// Generalized ridge solve without intercept: `β = (Xw'Xw + 2λΛ)^{-1} Xw'z`.
///
/// Columns are scaled by `Λ^{-1/2}`, the ordinary ridge problem is solved
/// through the thin SVD of the scaled `Xw'` (only an n×n diagonal core is
/// inverted), and the solution is scaled back.
pub fn ridge_solve(xw: &DMatrix<f64>, z: &DVector<f64>, penalty: &PenaltyConfig) -> Result<DVector<f64>> {
    check_inputs(xw, z, penalty)?;
    let svd = ScaledSvd::new(xw, &penalty.multipliers)?;
    svd.check_condition(penalty.lambda)?;
    Ok(svd.solve(z, penalty.lambda))
}

#[derive(Debug, Clone)]
pub struct InterceptSolve {
    pub intercept: f64,
    pub beta: DVector<f64>,
    /// Trace of the hat matrix, intercept included.
    pub hat_trace: f64,
}

/// Generalized ridge solve with an intercept column `s` (the weighted column of
/// ones, `W·1`).
///
/// An unpenalized intercept is profiled out by projecting `s` out of the design
/// and the response; a penalized one is treated as an extra column with
/// multiplier 1. Without an intercept `s` is ignored and the intercept is 0.
pub fn ridge_solve_with_intercept(
    xw: &DMatrix<f64>,
    s: &DVector<f64>,
    z: &DVector<f64>,
    penalty: &PenaltyConfig,
) -> Result<InterceptSolve> {
    check_inputs(xw, z, penalty)?;
    if s.len() != xw.nrows() {
        return Err(GrridgeError::DimensionMismatch { what: "intercept column", expected: xw.nrows(), got: s.len() });
    }
    let (n, p) = xw.shape();
    if !penalty.fit_intercept {
        let svd = ScaledSvd::new(xw, &penalty.multipliers)?;
        svd.check_condition(penalty.lambda)?;
        return Ok(InterceptSolve {
            intercept: 0.0,
            beta: svd.solve(z, penalty.lambda),
            hat_trace: svd.hat_trace(penalty.lambda),
        });
    }
    if penalty.intercept_penalized {
        let mut aug = DMatrix::zeros(n, p + 1);
        aug.column_mut(0).copy_from(s);
        aug.columns_mut(1, p).copy_from(xw);
        let mut mult = Vec::with_capacity(p + 1);
        mult.push(1.0);
        mult.extend_from_slice(&penalty.multipliers);
        let svd = ScaledSvd::new(&aug, &mult)?;
        svd.check_condition(penalty.lambda)?;
        let sol = svd.solve(z, penalty.lambda);
        return Ok(InterceptSolve {
            intercept: sol[0],
            beta: sol.rows(1, p).into_owned(),
            hat_trace: svd.hat_trace(penalty.lambda),
        });
    }

    let ss = s.norm_squared();
    if ss <= 0.0 {
        return Err(GrridgeError::InvalidArgument("intercept column is zero".into()));
    }
    let xp = project_out(xw, s, ss);
    let zp = z - s * (s.dot(z) / ss);
    let svd = ScaledSvd::new(&xp, &penalty.multipliers)?;
    svd.check_condition(penalty.lambda)?;
    let beta = svd.solve(&zp, penalty.lambda);
    let intercept = s.dot(&(z - xw * &beta)) / ss;
    Ok(InterceptSolve { intercept, beta, hat_trace: 1.0 + svd.hat_trace(penalty.lambda) })
}

/// Dual form of the row-weighted generalized ridge problem for n < p.
///
/// Holds `X̃ = X Λ^{-1/2}` and the kernel `K = X̃ X̃'`. For row weights `S`
/// the scaled weighted design is `S X̃` with kernel `S K S`, so every solve
/// works on an n×n system and β is recovered as `Λ^{-1/2} X̃' S u`.
pub(crate) struct ScaledKernel {
    scaled: DMatrix<f64>,
    kernel: DMatrix<f64>,
    inv_sqrt_mult: DVector<f64>,
}

impl ScaledKernel {
    pub fn new(x: &DMatrix<f64>, multipliers: &[f64]) -> Self {
        let inv_sqrt_mult = DVector::from_iterator(multipliers.len(), multipliers.iter().map(|m| 1.0 / m.sqrt()));
        let mut scaled = x.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= inv_sqrt_mult[k];
        }
        let kernel = &scaled * scaled.transpose();
        Self { scaled, kernel, inv_sqrt_mult }
    }

    /// Solves the problem with design `diag(s) X` and response `zw`. The
    /// intercept column is `s`. The hat-matrix trace is computed only on
    /// request.
    pub fn solve(
        &self,
        s: &DVector<f64>,
        zw: &DVector<f64>,
        penalty: &PenaltyConfig,
        with_trace: bool,
    ) -> Result<(InterceptSolve, bool)> {
        let n = s.len();
        let two_l = 2.0 * penalty.lambda;
        let kw = DMatrix::from_fn(n, n, |i, j| s[i] * self.kernel[(i, j)] * s[j]);
        let ss = s.norm_squared();
        let profile = penalty.fit_intercept && !penalty.intercept_penalized;
        let (kp, rhs) = if profile {
            if ss <= 0.0 {
                return Err(GrridgeError::InvalidArgument("intercept column is zero".into()));
            }
            // P K P with P = I - s s'/ss.
            let ks = &kw * s;
            let sks = s.dot(&ks);
            let mut kp = kw.clone();
            kp -= (&ks * s.transpose() + s * ks.transpose()) / ss;
            kp += (s * s.transpose()) * (sks / (ss * ss));
            (kp, zw - s * (s.dot(zw) / ss))
        } else if penalty.fit_intercept {
            (&kw + s * s.transpose(), zw.clone())
        } else {
            (kw.clone(), zw.clone())
        };
        // Upper bound on the condition number of the core.
        let bound = (kp.trace().max(0.0) + two_l) / two_l;
        if !bound.is_finite() {
            return Err(GrridgeError::SingularCore { condition: bound });
        }
        let mut core = kp;
        for i in 0..n {
            core[(i, i)] += two_l;
        }
        let chol = Cholesky::new(core).ok_or(GrridgeError::SingularCore { condition: f64::INFINITY })?;
        let u = chol.solve(&rhs);
        let su = u.component_mul(s);
        let beta = (self.scaled.tr_mul(&su)).component_mul(&self.inv_sqrt_mult);
        let intercept = if profile {
            s.dot(&(zw - &kw * &u)) / ss
        } else if penalty.fit_intercept {
            s.dot(&u)
        } else {
            0.0
        };
        let hat_trace = if with_trace {
            let inv = chol.inverse();
            let t = n as f64 - two_l * inv.trace();
            if profile {
                1.0 + t
            } else {
                t
            }
        } else {
            f64::NAN
        };
        Ok((InterceptSolve { intercept, beta, hat_trace }, bound <= MAX_CORE_CONDITION))
    }
}

/// `(I - s s'/s's) X`.
pub(crate) fn project_out(x: &DMatrix<f64>, s: &DVector<f64>, ss: f64) -> DMatrix<f64> {
    let proj = x.tr_mul(s) / ss;
    x - s * proj.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{dense_generalized_ridge, random_matrix, random_vector, rel_err};

    #[test]
    fn identity_design_closed_form() {
        let x = DMatrix::identity(2, 2);
        let z = DVector::from_vec(vec![1.0, 0.0]);
        let beta = ridge_solve(&x, &z, &PenaltyConfig::uniform(0.5, 2)).unwrap();
        assert!((beta[0] - 0.5).abs() < 1e-15);
        assert!(beta[1].abs() < 1e-15);
    }

    #[test]
    fn infinite_penalty_limit() {
        let x = random_matrix(6, 9, 1);
        let z = random_vector(6, 2);
        let beta = ridge_solve(&x, &z, &PenaltyConfig::uniform(1e12, 9)).unwrap();
        assert!(beta.norm() < 1e-6);
    }

    #[test]
    fn matches_dense_oracle_wide() {
        let x = random_matrix(5, 40, 3);
        let z = random_vector(5, 4);
        let mult: Vec<f64> = random_vector(40, 5).iter().map(|v| 0.2 + v.abs()).collect();
        let pen = PenaltyConfig::with_multipliers(1.0, mult.clone());
        let beta = ridge_solve(&x, &z, &pen).unwrap();
        let oracle = dense_generalized_ridge(&x, &z, 1.0, &mult);
        assert!(rel_err(&beta, &oracle) < 1e-8);
    }

    #[test]
    fn matches_dense_oracle_tall() {
        let x = random_matrix(30, 4, 13);
        let z = random_vector(30, 14);
        let mult = vec![0.5, 2.0, 1.0, 7.0];
        let beta = ridge_solve(&x, &z, &PenaltyConfig::with_multipliers(0.3, mult.clone())).unwrap();
        let oracle = dense_generalized_ridge(&x, &z, 0.3, &mult);
        assert!(rel_err(&beta, &oracle) < 1e-8);
    }

    #[test]
    fn unpenalized_intercept_matches_augmented_dense_oracle() {
        let n = 8;
        let x = random_matrix(n, 20, 21);
        let z = random_vector(n, 22);
        let s = random_vector(n, 23).map(|v| 0.3 + v.abs());
        let pen = PenaltyConfig::uniform(0.7, 20);
        let sol = ridge_solve_with_intercept(&x, &s, &z, &pen).unwrap();
        // Dense oracle: augmented system with zero penalty on the intercept column.
        let mut aug = DMatrix::zeros(n, 21);
        aug.column_mut(0).copy_from(&s);
        aug.columns_mut(1, 20).copy_from(&x);
        let mut lhs = aug.transpose() * &aug;
        for k in 1..21 {
            lhs[(k, k)] += 2.0 * 0.7;
        }
        let rhs = aug.transpose() * &z;
        let oracle = lhs.lu().solve(&rhs).unwrap();
        assert!((sol.intercept - oracle[0]).abs() < 1e-8 * oracle[0].abs().max(1.0));
        assert!(rel_err(&sol.beta, &oracle.rows(1, 20).into_owned()) < 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = DMatrix::identity(2, 2);
        let z = DVector::from_vec(vec![1.0, 0.0, 3.0]);
        assert!(matches!(
            ridge_solve(&x, &z, &PenaltyConfig::uniform(1.0, 2)),
            Err(GrridgeError::DimensionMismatch { .. })
        ));
        let z = DVector::from_vec(vec![1.0, f64::NAN]);
        assert!(matches!(ridge_solve(&x, &z, &PenaltyConfig::uniform(1.0, 2)), Err(GrridgeError::NonFinite(_))));
        let z = DVector::from_vec(vec![1.0, 0.0]);
        assert!(ridge_solve(&x, &z, &PenaltyConfig::with_multipliers(1.0, vec![1.0, 0.0])).is_err());
        assert!(ridge_solve(&x, &z, &PenaltyConfig::uniform(-1.0, 2)).is_err());
    }

    #[test]
    fn reports_singular_core() {
        let x = random_matrix(4, 10, 5) * 1e9;
        let z = random_vector(4, 6);
        match ridge_solve(&x, &z, &PenaltyConfig::uniform(1e-3, 10)) {
            Err(GrridgeError::SingularCore { condition }) => assert!(condition > MAX_CORE_CONDITION),
            other => panic!("expected singular core, got {other:?}"),
        }
    }

    #[test]
    fn kernel_matches_svd_path() {
        let x = random_matrix(7, 25, 31);
        let s = random_vector(7, 32).map(|v| 0.2 + v.abs());
        let zw = random_vector(7, 33);
        let mult: Vec<f64> = random_vector(25, 34).iter().map(|v| 0.1 + v * v).collect();
        let base = PenaltyConfig::with_multipliers(0.7, mult);
        let mut penalized = base.clone();
        penalized.intercept_penalized = true;
        let kernel = ScaledKernel::new(&x, &base.multipliers);
        let mut xw = x.clone();
        for (i, mut row) in xw.row_iter_mut().enumerate() {
            row *= s[i];
        }
        for pen in [base.clone(), penalized, base.clone().without_intercept()] {
            let (fast, ok) = kernel.solve(&s, &zw, &pen, true).unwrap();
            assert!(ok);
            let slow = ridge_solve_with_intercept(&xw, &s, &zw, &pen).unwrap();
            assert!(rel_err(&fast.beta, &slow.beta) < 1e-10);
            assert!((fast.intercept - slow.intercept).abs() < 1e-10 * (1.0 + slow.intercept.abs()));
            assert!((fast.hat_trace - slow.hat_trace).abs() < 1e-9);
        }
    }
}
