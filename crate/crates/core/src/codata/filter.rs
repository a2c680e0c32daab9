use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::{DesignMatrix, Response};
use crate::error::{GrridgeError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    /// Retained variable indices, ascending.
    pub kept: Vec<usize>,
    pub raw_p: Vec<f64>,
    pub adjusted_p: Vec<f64>,
    /// `mean(class 1) - mean(class 0)` per variable.
    pub mean_diff: Vec<f64>,
    /// Variables with zero within-class variance in both classes (p-value set to 1).
    pub zero_variance: Vec<usize>,
}

fn mean_var(sorted: &[f64]) -> (f64, f64) {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = if sorted.len() > 1 { sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

/// Two-sided Welch t-test. Returns `(t, p)`; `None` when both sample
/// variances vanish.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Option<(f64, f64)> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (ma, va) = mean_var(&a);
    let (mb, vb) = mean_var(&b);
    let sa = va / a.len() as f64;
    let sb = vb / b.len() as f64;
    let se2 = sa + sb;
    if !(se2 > 0.0) {
        return None;
    }
    let t = (ma - mb) / se2.sqrt();
    let mut df_den = 0.0;
    if a.len() > 1 {
        df_den += sa * sa / (a.len() as f64 - 1.0);
    }
    if b.len() > 1 {
        df_den += sb * sb / (b.len() as f64 - 1.0);
    }
    let df = se2 * se2 / df_den;
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some((t, (2.0 * dist.sf(t.abs())).min(1.0)))
}

/// Benjamini–Hochberg step-up adjusted p-values, in input order.
pub fn benjamini_hochberg(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0_f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        let value = p[i] * m as f64 / (rank + 1) as f64;
        running = running.min(value).min(1.0);
        adjusted[i] = running;
    }
    adjusted
}

/// Keeps variables with BH-adjusted Welch p-value `<= fdr_max` and absolute
/// class-mean difference `>= min_meandiff`.
pub fn filter_features(x: &DesignMatrix, y: &Response, fdr_max: f64, min_meandiff: f64) -> Result<FilterResult> {
    let labels =
        y.labels().ok_or_else(|| GrridgeError::InvalidResponse("feature filter needs a binary response".into()))?;
    if labels.len() != x.n_samples() {
        return Err(GrridgeError::DimensionMismatch { what: "response", expected: x.n_samples(), got: labels.len() });
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(GrridgeError::SingleClass);
    }
    let values = x.values();
    let p = x.n_vars();
    let mut raw_p = Vec::with_capacity(p);
    let mut mean_diff = Vec::with_capacity(p);
    let mut zero_variance = Vec::new();
    for k in 0..p {
        let col = values.column(k);
        let (mut c1, mut c0) = (Vec::new(), Vec::new());
        for (v, &l) in col.iter().zip(&labels) {
            if l {
                c1.push(*v)
            } else {
                c0.push(*v)
            }
        }
        c1.sort_by(f64::total_cmp);
        c0.sort_by(f64::total_cmp);
        mean_diff.push(mean_var(&c1).0 - mean_var(&c0).0);
        match welch_t_test(&c1, &c0) {
            Some((_, pv)) => raw_p.push(pv),
            None => {
                raw_p.push(1.0);
                zero_variance.push(k);
            }
        }
    }
    let adjusted_p = benjamini_hochberg(&raw_p);
    let kept = (0..p).filter(|&k| adjusted_p[k] <= fdr_max && mean_diff[k].abs() >= min_meandiff).collect();
    Ok(FilterResult { kept, raw_p, adjusted_p, mean_diff, zero_variance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn bh_step_up_by_hand() {
        let adj = benjamini_hochberg(&[0.01, 0.02, 0.03]);
        for a in adj {
            assert!((a - 0.03).abs() < 1e-15);
        }
        let adj = benjamini_hochberg(&[0.04, 0.001, 0.5, 0.03]);
        // sorted: 0.001*4/1=0.004, 0.03*4/2=0.06, 0.04*4/3=0.0533.., 0.5
        assert!((adj[1] - 0.004).abs() < 1e-15);
        assert!((adj[3] - 0.04 * 4.0 / 3.0).abs() < 1e-15);
        assert!((adj[0] - 0.04 * 4.0 / 3.0).abs() < 1e-15);
        assert!((adj[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn welch_reference_value() {
        // scipy.stats.ttest_ind([1,2,3,4], [2,4,6,8,10], equal_var=False)
        // -> t = -2.2514363231593695, p = 0.06913359319239236 (df = 5.52)
        let (t, p) = welch_t_test(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 8.0, 10.0]).unwrap();
        assert!((t - -2.251_436_323_159_369_5).abs() < 1e-12);
        assert!((p - 0.069_133_593_192_392_36).abs() < 1e-9, "p = {p}");
    }

    fn toy() -> (DesignMatrix, Response) {
        let x = DMatrix::from_row_slice(
            6,
            3,
            &[
                1.0, 5.0, 2.0, //
                2.0, 5.0, 2.0, //
                3.0, 5.0, 2.0, //
                2.0, 9.0, 4.0, //
                1.0, 9.5, 4.0, //
                3.0, 8.5, 4.0,
            ],
        );
        let y = Response::binary(DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0])).unwrap();
        (DesignMatrix::from_matrix(x).unwrap(), y)
    }

    #[test]
    fn equal_means_excluded_zero_variance_flagged() {
        let (x, y) = toy();
        let r = filter_features(&x, &y, 0.5, 0.1).unwrap();
        assert_eq!(r.raw_p[0], 1.0);
        assert_eq!(r.zero_variance, vec![2]);
        assert_eq!(r.kept, vec![1]);
        let all = filter_features(&x, &y, 1.0, 0.0).unwrap();
        assert_eq!(all.kept, vec![0, 1, 2]);
    }

    #[test]
    fn sample_order_invariant() {
        let (x, y) = toy();
        let perm = [4, 0, 5, 2, 3, 1];
        let xp = x.select_rows(&perm).unwrap();
        let yp = y.select(&perm).unwrap();
        assert_eq!(filter_features(&x, &y, 0.5, 0.1).unwrap(), filter_features(&xp, &yp, 0.5, 0.1).unwrap());
    }
}
