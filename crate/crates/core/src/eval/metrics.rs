use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{GrridgeError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    pub auc: f64,
    /// `(FPR, TPR)` pairs from `(0, 0)` to `(1, 1)`, one per distinct score.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub roc_points: Vec<(f64, f64)>,
    pub brier: f64,
    pub cvl: Option<f64>,
}

impl MetricsReport {
    pub fn from_predictions(scores: &[f64], labels: &[bool], cvl: Option<f64>) -> Result<Self> {
        let roc = roc_auc(scores, labels)?;
        Ok(Self { auc: roc.auc, roc_points: roc.points, brier: brier(scores, labels)?, cvl })
    }
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(GrridgeError::DimensionMismatch { what: "labels", expected: scores.len(), got: labels.len() });
    }
    if scores.is_empty() {
        return Err(GrridgeError::InvalidArgument("no scores".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(GrridgeError::NonFinite("scores"));
    }
    Ok(())
}

/// AUC as the Mann–Whitney statistic with midranks for ties, plus the ROC
/// curve evaluated at every distinct score threshold.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<Roc> {
    check_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(GrridgeError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Rank sum of positives; ranks are 1-based, tied blocks share their mean.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    let auc = u / (n_pos as f64 * n_neg as f64);

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut j = order.len();
    while j > 0 {
        let threshold = scores[order[j - 1]];
        while j > 0 && scores[order[j - 1]] == threshold {
            if labels[order[j - 1]] {
                tp += 1;
            } else {
                fp += 1;
            }
            j -= 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(Roc { auc, points })
}

/// Mean squared difference between probabilities and 0/1 outcomes.
pub fn brier(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(scores, labels)?;
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(GrridgeError::InvalidArgument(format!("score {s} is not a probability")));
    }
    let total: f64 = scores.iter().zip(labels).map(|(&s, &l)| (f64::from(u8::from(l)) - s).powi(2)).sum();
    Ok(total / scores.len() as f64)
}

/// Writes ROC points as a two-column `fpr,tpr` CSV.
pub fn write_roc_csv<W: Write>(out: W, points: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["fpr", "tpr"])?;
    for (fpr, tpr) in points {
        w.write_record([fpr.to_string(), tpr.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair_count_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0usize;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] && !labels[j] {
                    pairs += 1;
                    if scores[i] > scores[j] {
                        total += 1.0;
                    } else if scores[i] == scores[j] {
                        total += 0.5;
                    }
                }
            }
        }
        total / pairs as f64
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&[0.9, 0.2, 0.6, 0.4], &[true, false, false, true]).unwrap().auc, 0.75);
        assert_eq!(roc_auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap().auc, 0.5);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(GrridgeError::SingleClass)));
    }

    #[test]
    fn roc_endpoints() {
        let roc = roc_auc(&[0.9, 0.2, 0.6, 0.4, 0.6], &[true, false, false, true, true]).unwrap();
        assert_eq!(roc.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.points.last(), Some(&(1.0, 1.0)));
        assert_eq!(roc.points.len(), 5);
        assert!(roc.points.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
    }

    #[test]
    fn brier_examples() {
        assert_eq!(brier(&[1.0, 0.0], &[true, false]).unwrap(), 0.0);
        assert_eq!(brier(&[0.5; 3], &[true, false, true]).unwrap(), 0.25);
        assert!((brier(&[0.8, 0.3], &[true, false]).unwrap() - 0.065).abs() < 1e-15);
        assert!(brier(&[1.2], &[true]).is_err());
    }

    #[test]
    fn roc_csv() {
        let mut buf = Vec::new();
        write_roc_csv(&mut buf, &[(0.0, 0.0), (0.5, 1.0), (1.0, 1.0)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "fpr,tpr\n0,0\n0.5,1\n1,1\n");
    }

    proptest! {
        #[test]
        fn matches_pair_counting(
            raw in proptest::collection::vec((0u8..12, any::<bool>()), 2..60)
        ) {
            let scores: Vec<f64> = raw.iter().map(|r| r.0 as f64 / 4.0).collect();
            let labels: Vec<bool> = raw.iter().map(|r| r.1).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let auc = roc_auc(&scores, &labels).unwrap().auc;
            prop_assert_eq!(auc, pair_count_auc(&scores, &labels));
            let t: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
            prop_assert_eq!(roc_auc(&t, &labels).unwrap().auc, auc);
        }

        #[test]
        fn complement_without_ties(labels in proptest::collection::vec(any::<bool>(), 2..40), seed in 0u64..1000) {
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let scores: Vec<f64> = (0..labels.len()).map(|i| ((i as u64 * 2654435761 + seed) % 100003) as f64).collect();
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let a = roc_auc(&scores, &labels).unwrap().auc + roc_auc(&neg, &labels).unwrap().auc;
            prop_assert!((a - 1.0).abs() < 1e-12);
        }

        #[test]
        fn brier_bounded(pairs in proptest::collection::vec((0.0f64..=1.0, any::<bool>()), 1..50)) {
            let s: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let l: Vec<bool> = pairs.iter().map(|p| p.1).collect();
            let b = brier(&s, &l).unwrap();
            prop_assert!((0.0..=1.0).contains(&b));
        }
    }
}
