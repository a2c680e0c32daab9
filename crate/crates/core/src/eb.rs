//! Empirical-Bayes estimation of group prior variances τ²_g and their
//! conversion to calibrated penalty multipliers.
//!
//! Moment equations per group g: `B_g = Σ_{k∈g} (β_k²/v_k − 1)` is matched to
//! `Σ_h α_gh τ²_h`, where `α_gh` is the block sum of `d²_kℓ = c²_kℓ / v_k`.
//! The same `d²` enters every denominator, including the single-group global
//! estimate and the iterative per-group estimate.

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{GrridgeError, Result};
use crate::partition::Partition;
use crate::ridge::{alpha_matrix, MomentFactors};

/// Group variances are clamped into `[TAU2_CLAMP_LOW, TAU2_CLAMP_HIGH] × τ̂²`.
pub const TAU2_CLAMP_LOW: f64 = 1e-4;
pub const TAU2_CLAMP_HIGH: f64 = 1e6;
/// Floor for the global τ̂², relative to the implied prior variance `1/(2λ)`.
pub const TAU2_GLOBAL_FLOOR_REL: f64 = 1e-8;
/// Ceiling for adaptive-ridge multipliers, relative to `C / mean(β²)`.
pub const ADAPTIVE_CEILING: f64 = 1e6;
/// Largest condition number accepted for the G×G system.
pub const MAX_SYSTEM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct EBSystem {
    pub b: DVector<f64>,
    pub alpha: DMatrix<f64>,
}

impl EBSystem {
    pub fn new(b: Vec<f64>, alpha: DMatrix<f64>) -> Result<Self> {
        if alpha.nrows() != b.len() || alpha.ncols() != b.len() {
            return Err(GrridgeError::DimensionMismatch {
                what: "alpha matrix",
                expected: b.len(),
                got: alpha.nrows(),
            });
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(GrridgeError::NonFinite("group statistics B"));
        }
        if alpha.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(GrridgeError::InvalidArgument("alpha entries must be finite and non-negative".into()));
        }
        Ok(Self { b: DVector::from_vec(b), alpha })
    }

    /// Builds B and α for a partition from fitted coefficients and moments.
    pub fn from_fit(beta: &DVector<f64>, factors: &MomentFactors, partition: &Partition) -> Result<Self> {
        let b = group_b(beta, &factors.variances, partition)?;
        let alpha = alpha_matrix(factors, partition, partition)?;
        Self::new(b, alpha)
    }
}

/// Calibrated penalty multipliers of one partition, with the variances they
/// came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSet {
    pub partition_id: String,
    pub group_multipliers: Vec<f64>,
    pub tau2: Vec<f64>,
    pub sizes: Vec<usize>,
    /// Groups whose τ² hit a clamp bound before calibration.
    #[serde(default)]
    pub clamped_groups: Vec<usize>,
}

impl MultiplierSet {
    /// `|(1/p) Σ_g K_g / λ'_g − 1|`.
    pub fn calibration_error(&self) -> f64 {
        let p: usize = self.sizes.iter().sum();
        let mean_inv: f64 =
            self.sizes.iter().zip(&self.group_multipliers).map(|(&k, m)| k as f64 / m).sum::<f64>() / p as f64;
        (mean_inv - 1.0).abs()
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(GrridgeError::DimensionMismatch { what, expected, got });
    }
    Ok(())
}

/// `B_g = Σ_{k∈g} (β_k²/v_k − 1)`.
pub fn group_b(beta: &DVector<f64>, v: &DVector<f64>, partition: &Partition) -> Result<Vec<f64>> {
    check_len("coefficient variances", beta.len(), v.len())?;
    check_len("partition size", beta.len(), partition.n_vars())?;
    if let Some(k) = v.iter().position(|x| !(*x > 0.0)) {
        return Err(GrridgeError::InvalidArgument(format!("variance of variable {k} is not positive")));
    }
    let mut b = vec![0.0; partition.n_groups()];
    for (k, &g) in partition.group_of().iter().enumerate() {
        b[g] += beta[k] * beta[k] / v[k] - 1.0;
    }
    Ok(b)
}

/// Solves `α τ² = B`. The raw solution may contain negative or extreme
/// values; callers clamp with [`clamp_tau2`].
pub fn solve_system(system: &EBSystem) -> Result<Vec<f64>> {
    let g = system.b.len();
    if g == 0 {
        return Err(GrridgeError::InvalidArgument("empty system".into()));
    }
    let svd = SVD::new(system.alpha.clone(), true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_SYSTEM_CONDITION) {
        return Err(GrridgeError::SingularSystem { condition });
    }
    let tau2 = system.alpha.clone().lu().solve(&system.b).ok_or(GrridgeError::SingularSystem { condition })?;
    Ok(tau2.iter().copied().collect())
}

/// Unclamped single-group estimate `Σ_k(β_k²/v_k − 1) / Σ_{k,ℓ} d²_kℓ`.
pub fn tau_global_raw(beta: &DVector<f64>, v: &DVector<f64>, factors: &MomentFactors) -> Result<f64> {
    let p = factors.n_vars();
    let single = Partition::single("global", p)?;
    let numerator = group_b(beta, v, &single)?[0];
    let denominator = alpha_matrix(factors, &single, &single)?[(0, 0)];
    if !(denominator > 0.0) {
        return Err(GrridgeError::InvalidArgument("zero denominator in global variance estimate".into()));
    }
    Ok(numerator / denominator)
}

/// Global estimate, floored at `TAU2_GLOBAL_FLOOR_REL / (2λ)`.
pub fn tau_global(beta: &DVector<f64>, v: &DVector<f64>, factors: &MomentFactors) -> Result<f64> {
    let raw = tau_global_raw(beta, v, factors)?;
    Ok(raw.max(tau_global_floor(factors.lambda)))
}

pub fn tau_global_floor(lambda: f64) -> f64 {
    TAU2_GLOBAL_FLOOR_REL / (2.0 * lambda)
}

/// Per-group estimate with all other groups held at the global variance:
/// `τ²_g = (B_g − Σ_{h≠g} α_gh τ̂²) / α_gg`. Returns raw values.
pub fn iterative_tau2(system: &EBSystem, tau2_global: f64) -> Result<Vec<f64>> {
    if !(tau2_global >= 0.0) {
        return Err(GrridgeError::InvalidArgument(format!("global variance must be non-negative, got {tau2_global}")));
    }
    let g_count = system.b.len();
    (0..g_count)
        .map(|g| {
            let within = system.alpha[(g, g)];
            if !(within > 0.0) {
                return Err(GrridgeError::EmptyGroup(g));
            }
            let cross: f64 = (0..g_count).filter(|&h| h != g).map(|h| system.alpha[(g, h)]).sum();
            Ok((system.b[g] - cross * tau2_global) / within)
        })
        .collect()
}

pub fn tau_group_iterative(
    beta: &DVector<f64>,
    v: &DVector<f64>,
    factors: &MomentFactors,
    partition: &Partition,
    tau2_global: f64,
) -> Result<Vec<f64>> {
    let b = group_b(beta, v, partition)?;
    let alpha = alpha_matrix(factors, partition, partition)?;
    iterative_tau2(&EBSystem::new(b, alpha)?, tau2_global)
}

/// Clamps each τ²_g into `[TAU2_CLAMP_LOW·τ̂², TAU2_CLAMP_HIGH·τ̂²]`; non-finite
/// values go to the lower bound. Returns the clamped values and the indices
/// that moved.
pub fn clamp_tau2(raw: &[f64], tau2_global: f64) -> (Vec<f64>, Vec<usize>) {
    let lo = TAU2_CLAMP_LOW * tau2_global;
    let hi = TAU2_CLAMP_HIGH * tau2_global;
    let mut clamped = Vec::new();
    let values = raw
        .iter()
        .enumerate()
        .map(|(g, &t)| {
            let c = if t.is_finite() { t.clamp(lo, hi) } else { lo };
            if c != t {
                clamped.push(g);
            }
            c
        })
        .collect();
    (values, clamped)
}

/// `λ'_g = C / τ²_g` with `C = Σ_g (K_g/p) τ²_g`, so that the size-weighted
/// mean of `1/λ'_g` is one.
pub fn calibrate(partition_id: &str, tau2: &[f64], sizes: &[usize]) -> Result<MultiplierSet> {
    check_len("group sizes", tau2.len(), sizes.len())?;
    if tau2.is_empty() {
        return Err(GrridgeError::InvalidArgument("no groups to calibrate".into()));
    }
    if tau2.iter().all(|t| *t == 0.0) {
        return Err(GrridgeError::InvalidArgument("all group variances are zero".into()));
    }
    if let Some(g) = tau2.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(GrridgeError::InvalidArgument(format!("group variance {g} is not positive: {}", tau2[g])));
    }
    let p: usize = sizes.iter().sum();
    let c: f64 = tau2.iter().zip(sizes).map(|(t, &k)| (k as f64 / p as f64) * t).sum();
    Ok(MultiplierSet {
        partition_id: partition_id.to_string(),
        group_multipliers: tau2.iter().map(|t| c / t).collect(),
        tau2: tau2.to_vec(),
        sizes: sizes.to_vec(),
        clamped_groups: Vec::new(),
    })
}

/// Back to the original scale: `β_k = β'_k / √m_k`, `v_k = v'_k / m_k`.
pub fn rescale_estimates(
    beta_prime: &DVector<f64>,
    v_prime: &DVector<f64>,
    multipliers: &[f64],
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_len("multipliers", beta_prime.len(), multipliers.len())?;
    check_len("variances", beta_prime.len(), v_prime.len())?;
    if multipliers.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(GrridgeError::InvalidPenalty("multipliers must be positive".into()));
    }
    let beta = DVector::from_fn(beta_prime.len(), |k, _| beta_prime[k] / multipliers[k].sqrt());
    let v = DVector::from_fn(v_prime.len(), |k, _| v_prime[k] / multipliers[k]);
    Ok((beta, v))
}

/// Per-variable product of the group multipliers of every partition.
pub fn compose_multipliers(sets: &[(&[f64], &Partition)]) -> Result<Vec<f64>> {
    let Some((_, first)) = sets.first() else {
        return Err(GrridgeError::InvalidArgument("no multiplier sets to compose".into()));
    };
    let p = first.n_vars();
    let mut out = vec![1.0; p];
    for (mult, part) in sets {
        if part.n_vars() != p {
            return Err(GrridgeError::InvalidPartition(format!(
                "partition '{}' covers {} variables, expected {p}",
                part.id(),
                part.n_vars()
            )));
        }
        for (o, m) in out.iter_mut().zip(part.expand(mult)?) {
            *o *= m;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveMultipliers {
    pub multipliers: Vec<f64>,
    /// Variables whose multiplier hit the ceiling.
    pub clamped: Vec<usize>,
}

/// Adaptive ridge: `λ'_k = C / β_k²` with `C = mean(β²)`, capped at
/// `ADAPTIVE_CEILING · C / mean(β²)`, which is `ADAPTIVE_CEILING` itself.
pub fn adaptive_ridge_multipliers(beta_init: &DVector<f64>) -> Result<AdaptiveMultipliers> {
    if beta_init.is_empty() {
        return Err(GrridgeError::InvalidArgument("empty coefficient vector".into()));
    }
    if beta_init.iter().any(|b| !b.is_finite()) {
        return Err(GrridgeError::NonFinite("initial coefficients"));
    }
    let c = beta_init.iter().map(|b| b * b).sum::<f64>() / beta_init.len() as f64;
    if c == 0.0 {
        return Err(GrridgeError::InvalidArgument("all initial coefficients are zero".into()));
    }
    let ceiling = ADAPTIVE_CEILING;
    let mut clamped = Vec::new();
    let multipliers = beta_init
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let m = c / (b * b);
            if m > ceiling || !m.is_finite() {
                clamped.push(k);
                ceiling
            } else {
                m
            }
        })
        .collect();
    Ok(AdaptiveMultipliers { multipliers, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Monotone;
    use crate::ridge::moment_factors;
    use crate::testutil::{random_matrix, random_vector};

    fn two_groups(p: usize, split: usize) -> Partition {
        let group_of = (0..p).map(|k| usize::from(k >= split)).collect();
        Partition::new("t", group_of, vec!["a".into(), "b".into()], Monotone::None).unwrap()
    }

    #[test]
    fn group_b_examples() {
        let v = DVector::from_vec(vec![0.5, 2.0, 1.5]);
        let beta = v.map(f64::sqrt);
        let b = group_b(&beta, &v, &two_groups(3, 1)).unwrap();
        assert!(b.iter().all(|x| x.abs() < 1e-15));

        let b = group_b(
            &DVector::from_vec(vec![2.0, 0.0]),
            &DVector::from_vec(vec![1.0, 1.0]),
            &Partition::single("s", 2).unwrap(),
        )
        .unwrap();
        assert_eq!(b, vec![2.0]);
    }

    #[test]
    fn group_b_matches_direct_sum() {
        let beta = random_vector(50, 1);
        let v = random_vector(50, 2).map(|x| 0.1 + x.abs());
        let group_of: Vec<usize> = (0..50).map(|k| (k * 7) % 5).collect();
        let part =
            Partition::new("t", group_of.clone(), (0..5).map(|g| g.to_string()).collect(), Monotone::None).unwrap();
        let b = group_b(&beta, &v, &part).unwrap();
        for (g, bg) in b.iter().enumerate() {
            let direct: f64 = (0..50).filter(|&k| group_of[k] == g).map(|k| beta[k].powi(2) / v[k] - 1.0).sum();
            assert!((bg - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn system_examples() {
        let sys = EBSystem::new(vec![6.0, 3.0], DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0]))).unwrap();
        assert_eq!(solve_system(&sys).unwrap(), vec![2.0, 1.5]);

        let sys = EBSystem::new(vec![4.0, 5.0], DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let tau = solve_system(&sys).unwrap();
        assert!((tau[0] - 1.0).abs() < 1e-14 && (tau[1] - 2.0).abs() < 1e-14);

        let sing = EBSystem::new(vec![1.0, 1.0], DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0])).unwrap();
        assert!(matches!(solve_system(&sing), Err(GrridgeError::SingularSystem { .. })));
    }

    #[test]
    fn iterative_examples() {
        let sys = EBSystem::new(vec![4.0, 5.0], DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        assert_eq!(iterative_tau2(&sys, 1.0).unwrap(), vec![1.5, 2.0]);

        let diag = EBSystem::new(vec![6.0, 3.0], DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0]))).unwrap();
        assert_eq!(iterative_tau2(&diag, 0.0).unwrap(), iterative_tau2(&diag, 17.0).unwrap());
        assert_eq!(iterative_tau2(&diag, 5.0).unwrap(), solve_system(&diag).unwrap());

        let empty = EBSystem::new(vec![1.0, 0.0], DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(matches!(iterative_tau2(&empty, 1.0), Err(GrridgeError::EmptyGroup(1))));
    }

    #[test]
    fn tau_global_orthonormal_cases() {
        let x1 = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let f1 = moment_factors(&x1, 0.5).unwrap();
        assert!((f1.variances[0] - 0.25).abs() < 1e-15);
        let raw = tau_global_raw(&DVector::from_vec(vec![0.5]), &f1.variances, &f1).unwrap();
        assert!(raw.abs() < 1e-14);
        let t = tau_global(&DVector::from_vec(vec![0.5]), &f1.variances, &f1).unwrap();
        assert_eq!(t, tau_global_floor(0.5));

        let x2 = DMatrix::<f64>::identity(3, 2);
        let f2 = moment_factors(&x2, 0.5).unwrap();
        let t = tau_global(&DVector::from_vec(vec![1.0, 1.0]), &f2.variances, &f2).unwrap();
        assert!((t - 3.0).abs() < 1e-12);
    }

    #[test]
    fn tau_global_matches_naive_double_sum() {
        let x = random_matrix(6, 20, 5);
        let f = moment_factors(&x, 0.7).unwrap();
        let beta = random_vector(20, 6);
        let num: f64 = (0..20).map(|k| beta[k].powi(2) / f.variances[k] - 1.0).sum();
        let den: f64 = (0..20).flat_map(|k| (0..20).map(move |l| (k, l))).map(|(k, l)| f.d(k, l).powi(2)).sum();
        let t = tau_global_raw(&beta, &f.variances, &f).unwrap();
        assert!((t - num / den).abs() < 1e-9 * (num / den).abs());
    }

    #[test]
    fn orthonormal_design_routes_coincide() {
        let x = DMatrix::<f64>::identity(6, 4);
        let f = moment_factors(&x, 0.5).unwrap();
        let beta = DVector::from_vec(vec![1.0, 0.3, 2.0, 0.1]);
        let part = two_groups(4, 2);
        let sys = EBSystem::from_fit(&beta, &f, &part).unwrap();
        assert!(sys.alpha[(0, 1)].abs() < 1e-14 && sys.alpha[(1, 0)].abs() < 1e-14);
        assert!((sys.alpha[(0, 0)] - 2.0).abs() < 1e-12);
        let direct = solve_system(&sys).unwrap();
        let iter = tau_group_iterative(&beta, &f.variances, &f, &part, 0.9).unwrap();
        for (a, b) in direct.iter().zip(&iter) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((direct[0] - sys.b[0] / 2.0).abs() < 1e-12);
    }

    #[test]
    fn clamp_bounds() {
        let (v, idx) = clamp_tau2(&[-1.0, 0.5, 1e9, f64::NAN], 1.0);
        assert_eq!(v, vec![1e-4, 0.5, 1e6, 1e-4]);
        assert_eq!(idx, vec![0, 2, 3]);
    }

    #[test]
    fn calibrate_examples() {
        let one = calibrate("p", &[3.7], &[10]).unwrap();
        assert_eq!(one.group_multipliers, vec![1.0]);

        let two = calibrate("p", &[1.0, 3.0], &[1, 1]).unwrap();
        assert!((two.group_multipliers[0] - 2.0).abs() < 1e-15);
        assert!((two.group_multipliers[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!(two.calibration_error() < 1e-12);

        let same = calibrate("p", &[0.3, 0.3], &[3, 7]).unwrap();
        assert!(same.group_multipliers.iter().all(|m| (m - 1.0).abs() < 1e-15));

        assert!(calibrate("p", &[0.0, 0.0], &[1, 1]).is_err());
        assert!(calibrate("p", &[1.0, -1.0], &[1, 1]).is_err());
    }

    #[test]
    fn calibration_scale_equivariant() {
        let tau = [0.2, 1.7, 0.05, 3.3];
        let sizes = [5, 1, 9, 2];
        let a = calibrate("p", &tau, &sizes).unwrap();
        let scaled: Vec<f64> = tau.iter().map(|t| t * 123.4).collect();
        let b = calibrate("p", &scaled, &sizes).unwrap();
        for (x, y) in a.group_multipliers.iter().zip(&b.group_multipliers) {
            assert!((x - y).abs() < 1e-12 * x);
        }
    }

    #[test]
    fn rescale_examples() {
        let (b, v) = rescale_estimates(&DVector::from_vec(vec![1.0]), &DVector::from_vec(vec![0.2]), &[4.0]).unwrap();
        assert_eq!(b[0], 0.5);
        assert!((v[0] - 0.05).abs() < 1e-17);
        let beta = random_vector(10, 3);
        let var = random_vector(10, 4).map(f64::abs);
        let (b1, v1) = rescale_estimates(&beta, &var, &[1.0; 10]).unwrap();
        assert_eq!((b1, v1), (beta.clone(), var.clone()));
        let m: Vec<f64> = random_vector(10, 5).iter().map(|x| 0.1 + x * x).collect();
        let (b2, v2) = rescale_estimates(&beta, &var, &m).unwrap();
        let inv: Vec<f64> = m.iter().map(|x| 1.0 / x).collect();
        let (b3, v3) = rescale_estimates(&b2, &v2, &inv).unwrap();
        assert!((b3 - &beta).amax() < 1e-12 && (v3 - &var).amax() < 1e-12);
    }

    #[test]
    fn compose_product_rule() {
        let a = Partition::new("a", vec![0, 0, 1, 1, 2, 2], vec!["x".into(), "y".into(), "z".into()], Monotone::None)
            .unwrap();
        let b = Partition::new("b", vec![1, 0, 1, 0, 1, 0], vec!["u".into(), "w".into()], Monotone::None).unwrap();
        let ma = [2.0, 0.5, 4.0];
        let mb = [3.0, 0.25];
        let composed = compose_multipliers(&[(&ma, &a), (&mb, &b)]).unwrap();
        for k in 0..6 {
            assert_eq!(composed[k], ma[a.group_of()[k]] * mb[b.group_of()[k]]);
        }
        assert_eq!(composed[0], 2.0 * 0.25);
        assert_eq!(compose_multipliers(&[(&ma, &a)]).unwrap(), vec![2.0, 2.0, 0.5, 0.5, 4.0, 4.0]);
        let short = Partition::single("s", 4).unwrap();
        assert!(compose_multipliers(&[(&ma, &a), (&[1.0], &short)]).is_err());
    }

    #[test]
    fn adaptive_examples() {
        let a = adaptive_ridge_multipliers(&DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert!((a.multipliers[0] - 2.5).abs() < 1e-15 && (a.multipliers[1] - 0.625).abs() < 1e-15);
        let mean_inv = (1.0 / a.multipliers[0] + 1.0 / a.multipliers[1]) / 2.0;
        assert!((mean_inv - 1.0).abs() < 1e-15);

        let c = adaptive_ridge_multipliers(&DVector::from_vec(vec![0.7, -0.7])).unwrap();
        assert!(c.multipliers.iter().all(|m| (m - 1.0).abs() < 1e-15));

        let z = adaptive_ridge_multipliers(&DVector::from_vec(vec![1.0, 0.0, 2.0])).unwrap();
        assert_eq!(z.clamped, vec![1]);
        assert_eq!(z.multipliers[1], ADAPTIVE_CEILING);
        assert!(adaptive_ridge_multipliers(&DVector::zeros(3)).is_err());
    }
}
