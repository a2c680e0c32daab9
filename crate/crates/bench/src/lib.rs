//! Seeded inputs for the kernel benchmarks.

use grridge::nalgebra::{DMatrix, DVector};
use grridge::ridge::expit;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Logistic response driven by the first ten variables.
pub fn logistic_response(x: &DMatrix<f64>, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = x.ncols().min(10);
    let mut y = DVector::from_fn(x.nrows(), |i, _| {
        let eta: f64 = (0..k).map(|j| x[(i, j)]).sum::<f64>() * 0.5;
        f64::from(u8::from(rng.random::<f64>() < expit(eta)))
    });
    y[0] = 0.0;
    y[1] = 1.0;
    y
}

/// Contiguous blocks of near-equal size, as member lists.
pub fn blocks(p: usize, g: usize) -> Vec<Vec<usize>> {
    (0..g).map(|i| (i * p / g..(i + 1) * p / g).collect()).collect()
}

/// Block sums of squares of `L R`, formed explicitly.
pub fn naive_alpha(
    left: &DMatrix<f64>,
    right: &DMatrix<f64>,
    rows: &[Vec<usize>],
    cols: &[Vec<usize>],
) -> DMatrix<f64> {
    let d = left * right;
    DMatrix::from_fn(rows.len(), cols.len(), |g, h| {
        rows[g].iter().flat_map(|&k| cols[h].iter().map(move |&l| (k, l))).map(|(k, l)| d[(k, l)].powi(2)).sum()
    })
}
