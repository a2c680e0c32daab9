//! Synthetic data with planted group variances: equicorrelated Gaussian
//! blocks, Gaussian coefficients with a per-group variance, and a logistic
//! response.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{DesignMatrix, Response};
use crate::error::{GrridgeError, Result};
use crate::partition::{Monotone, Partition};
use crate::ridge::expit;
use crate::rng::component_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub groups: usize,
    pub group_size: usize,
    pub n: usize,
    pub n_test: usize,
    /// Within-group equicorrelation.
    pub rho: f64,
    /// Ratio of the largest to the smallest non-null group variance.
    pub signal_skew: f64,
    /// Fraction of groups with zero coefficients; these are the last groups.
    pub sparsity: f64,
    /// Sum of the coefficient variances over all variables, i.e. the expected
    /// variance of the linear predictor.
    pub signal_var: f64,
    pub seed: u64,
}

impl Default for SimScenario {
    fn default() -> Self {
        Self {
            groups: 5,
            group_size: 100,
            n: 100,
            n_test: 1000,
            rho: 0.3,
            signal_skew: 20.0,
            sparsity: 0.4,
            signal_var: 4.0,
            seed: 1,
        }
    }
}

impl SimScenario {
    pub fn n_vars(&self) -> usize {
        self.groups * self.group_size
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GrridgeError::InvalidArgument(msg));
        if self.groups == 0 || self.group_size == 0 {
            return bad("groups and group size must be positive".into());
        }
        if self.n < 2 || self.n_test < 2 {
            return bad("training and test sets need at least 2 samples".into());
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if !(self.signal_skew.is_finite() && self.signal_skew > 0.0) {
            return bad(format!("signal skew must be positive, got {}", self.signal_skew));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return bad(format!("sparsity must lie in [0, 1], got {}", self.sparsity));
        }
        if !(self.signal_var.is_finite() && self.signal_var > 0.0) {
            return bad(format!("signal variance must be positive, got {}", self.signal_var));
        }
        Ok(())
    }

    /// Planted group variances: non-null groups first, log-spaced and
    /// decreasing from `signal_skew × τ²_min` down to `τ²_min`; null groups
    /// last with zero variance.
    pub fn group_variances(&self) -> Vec<f64> {
        let null = (self.sparsity * self.groups as f64).round() as usize;
        let active = self.groups - null.min(self.groups);
        let shape: Vec<f64> = (0..active)
            .map(|g| if active == 1 { 1.0 } else { self.signal_skew.powf(1.0 - g as f64 / (active - 1) as f64) })
            .collect();
        let total: f64 = shape.iter().sum::<f64>() * self.group_size as f64;
        let mut tau2: Vec<f64> = shape.iter().map(|s| s * self.signal_var / total).collect();
        tau2.resize(self.groups, 0.0);
        tau2
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimTruth {
    pub scenario: SimScenario,
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub tau2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimData {
    pub train_x: DesignMatrix,
    pub train_y: Response,
    pub test_x: DesignMatrix,
    pub test_y: Response,
    pub partition: Partition,
    pub truth: SimTruth,
}

fn draw_design(sc: &SimScenario, rows: usize, component: &str) -> DMatrix<f64> {
    let mut rng = component_rng(sc.seed, component);
    let (a, b) = (sc.rho.sqrt(), (1.0 - sc.rho).sqrt());
    let p = sc.n_vars();
    let mut x = DMatrix::zeros(rows, p);
    for i in 0..rows {
        for g in 0..sc.groups {
            let shared: f64 = rng.sample(StandardNormal);
            for j in 0..sc.group_size {
                let e: f64 = rng.sample(StandardNormal);
                x[(i, g * sc.group_size + j)] = a * shared + b * e;
            }
        }
    }
    x
}

fn draw_response(eta: &DVector<f64>, seed: u64, component: &str) -> DVector<f64> {
    let mut rng = component_rng(seed, component);
    eta.map(|e| f64::from(u8::from(rng.random::<f64>() < expit(e))))
}

/// Intercept c with `mean(expit(η + c)) = 1/2`, by bisection.
fn balancing_intercept(eta: &DVector<f64>) -> f64 {
    let mean = |c: f64| eta.iter().map(|e| expit(e + c)).sum::<f64>() / eta.len() as f64;
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn ids(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

pub fn simulate_scenario(sc: &SimScenario) -> Result<SimData> {
    sc.validate()?;
    let p = sc.n_vars();
    let tau2 = sc.group_variances();
    let mut rng = component_rng(sc.seed, "beta");
    let beta: Vec<f64> = (0..p)
        .map(|k| {
            let z: f64 = rng.sample(StandardNormal);
            z * tau2[k / sc.group_size].sqrt()
        })
        .collect();
    let beta_v = DVector::from_column_slice(&beta);

    let train = draw_design(sc, sc.n, "train-x");
    let test = draw_design(sc, sc.n_test, "test-x");
    let eta_train = &train * &beta_v;
    let eta_test = &test * &beta_v;
    let intercept = balancing_intercept(&eta_test);
    let train_y = draw_response(&eta_train.add_scalar(intercept), sc.seed, "train-y");
    let test_y = draw_response(&eta_test.add_scalar(intercept), sc.seed, "test-y");

    let var_ids = ids("v", p);
    let partition =
        Partition::new("groups", (0..p).map(|k| k / sc.group_size).collect(), ids("g", sc.groups), Monotone::None)?;
    Ok(SimData {
        train_x: DesignMatrix::new(train, var_ids.clone(), ids("s", sc.n))?,
        train_y: Response::binary(train_y).map_err(|e| e.context("simulated training response"))?,
        test_x: DesignMatrix::new(test, var_ids, ids("t", sc.n_test))?,
        test_y: Response::binary(test_y).map_err(|e| e.context("simulated test response"))?,
        partition,
        truth: SimTruth { scenario: sc.clone(), beta, intercept, tau2 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimScenario {
        SimScenario { groups: 4, group_size: 50, n: 100, n_test: 1000, ..Default::default() }
    }

    #[test]
    fn shapes() {
        let d = simulate_scenario(&small()).unwrap();
        assert_eq!((d.train_x.n_samples(), d.train_x.n_vars()), (100, 200));
        assert_eq!((d.test_x.n_samples(), d.test_x.n_vars()), (1000, 200));
        assert_eq!(d.partition.sizes(), &[50, 50, 50, 50]);
    }

    #[test]
    fn deterministic() {
        let a = simulate_scenario(&small()).unwrap();
        let b = simulate_scenario(&small()).unwrap();
        assert_eq!(a.train_x, b.train_x);
        assert_eq!(a.test_y, b.test_y);
        assert_eq!(a.truth, b.truth);
        let c = simulate_scenario(&SimScenario { seed: 2, ..small() }).unwrap();
        assert_ne!(a.truth.beta, c.truth.beta);
    }

    #[test]
    fn variances_layout() {
        let sc = SimScenario { groups: 5, group_size: 100, sparsity: 0.4, signal_skew: 20.0, ..Default::default() };
        let t = sc.group_variances();
        assert_eq!(&t[3..], &[0.0, 0.0]);
        assert!((t[0] / t[2] - 20.0).abs() < 1e-9);
        assert!(t[0] > t[1] && t[1] > t[2]);
        let total: f64 = t.iter().map(|v| v * 100.0).sum();
        assert!((total - 4.0).abs() < 1e-12);
    }

    #[test]
    fn null_groups_exactly_zero() {
        let sc = SimScenario { sparsity: 0.5, ..small() };
        let d = simulate_scenario(&sc).unwrap();
        assert!(d.truth.beta[100..].iter().all(|&b| b == 0.0));
        let all_null = simulate_scenario(&SimScenario { sparsity: 1.0, ..small() }).unwrap();
        assert!(all_null.truth.beta.iter().all(|&b| b == 0.0));
        assert!(all_null.truth.intercept.abs() < 1e-9);
    }

    #[test]
    fn within_group_correlation_near_rho() {
        let d = simulate_scenario(&small()).unwrap();
        let x = d.test_x.values();
        let corr = |a: usize, b: usize| {
            let (ca, cb) = (x.column(a), x.column(b));
            let (ma, mb) = (ca.mean(), cb.mean());
            let cov: f64 = ca.iter().zip(cb.iter()).map(|(u, v)| (u - ma) * (v - mb)).sum();
            cov / ((ca.map(|u| (u - ma).powi(2)).sum()) * (cb.map(|v| (v - mb).powi(2)).sum())).sqrt()
        };
        let mut total = 0.0;
        for j in 1..20 {
            total += corr(0, j);
        }
        assert!((total / 19.0 - 0.3).abs() < 0.05);
        assert!(corr(0, 60).abs() < 0.1);
    }

    #[test]
    fn coefficient_variance_within_factor_three() {
        let d = simulate_scenario(&small()).unwrap();
        for (g, &t) in d.truth.tau2.iter().enumerate().filter(|(_, t)| **t > 0.0) {
            let b = &d.truth.beta[g * 50..(g + 1) * 50];
            let v = b.iter().map(|x| x * x).sum::<f64>() / 50.0;
            assert!(v > t / 3.0 && v < 3.0 * t, "group {g}: {v} vs {t}");
        }
    }

    #[test]
    fn classes_roughly_balanced() {
        let d = simulate_scenario(&small()).unwrap();
        let mean = d.test_y.values().mean();
        assert!((mean - 0.5).abs() < 0.1, "{mean}");
    }

    #[test]
    fn rejects_invalid() {
        assert!(simulate_scenario(&SimScenario { rho: 1.0, ..small() }).is_err());
        assert!(simulate_scenario(&SimScenario { sparsity: 1.5, ..small() }).is_err());
        assert!(simulate_scenario(&SimScenario { groups: 0, ..small() }).is_err());
    }
}
