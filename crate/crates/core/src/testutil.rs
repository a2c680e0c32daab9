//! Shared helpers for unit tests.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn random_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

pub fn random_vector(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Random 0/1 vector with both classes present.
pub fn random_binary(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = DVector::from_fn(n, |_, _| if rng.random::<bool>() { 1.0 } else { 0.0 });
    y[0] = 0.0;
    y[1] = 1.0;
    y
}

pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Dense p×p solve of `(X'X + 2λΛ) β = X'z`.
pub fn dense_generalized_ridge(x: &DMatrix<f64>, z: &DVector<f64>, lambda: f64, mult: &[f64]) -> DVector<f64> {
    let mut lhs = x.transpose() * x;
    for (k, m) in mult.iter().enumerate() {
        lhs[(k, k)] += 2.0 * lambda * m;
    }
    lhs.lu().solve(&(x.transpose() * z)).expect("dense oracle solve")
}
