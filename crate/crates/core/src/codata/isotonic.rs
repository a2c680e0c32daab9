use crate::partition::Monotone;

/// Weighted isotonic regression by pool-adjacent-violators.
///
/// Minimizes `Σ w_g (x_g - values_g)²` subject to `x` being non-decreasing
/// (`Increasing`) or non-increasing (`Decreasing`). `Monotone::None` returns the
/// input unchanged. Weights must be positive.
pub fn isotonic_fit(values: &[f64], weights: &[f64], direction: Monotone) -> Vec<f64> {
    assert_eq!(values.len(), weights.len(), "values and weights differ in length");
    assert!(weights.iter().all(|w| *w > 0.0), "isotonic weights must be positive");
    match direction {
        Monotone::None => values.to_vec(),
        Monotone::Increasing => pava_increasing(values, weights),
        Monotone::Decreasing => {
            let neg: Vec<f64> = values.iter().map(|v| -v).collect();
            pava_increasing(&neg, weights).into_iter().map(|v| -v).collect()
        }
    }
}

fn pava_increasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // Each block: (weighted mean, total weight, count).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let mut cur = (v, w, 1usize);
        while let Some(&(m, tw, c)) = blocks.last() {
            if m <= cur.0 {
                break;
            }
            blocks.pop();
            let total = tw + cur.1;
            cur = ((m * tw + cur.0 * cur.1) / total, total, c + cur.2);
        }
        blocks.push(cur);
    }
    blocks.into_iter().flat_map(|(m, _, c)| std::iter::repeat_n(m, c)).collect()
}
