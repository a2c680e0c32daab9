use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{GrridgeError, Result};
use crate::rng::component_rng;

/// Assignment of samples to `k` folds. Fold indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    assignments: Vec<usize>,
    k: usize,
    seed: u64,
    stratified: bool,
}

/// Builds a fold plan. With labels, each class is shuffled separately and the
/// classes are dealt round-robin, so every fold gets `⌊n_c/k⌋` or `⌈n_c/k⌉`
/// members of class c. `k = n` gives leave-one-out.
pub fn make_folds(n: usize, k: usize, labels: Option<&[bool]>, seed: u64) -> Result<FoldPlan> {
    make_folds_in(n, k, labels, seed, "folds")
}

/// As [`make_folds`], drawing from the named random stream so that nested
/// plans built from one seed are independent.
pub fn make_folds_in(n: usize, k: usize, labels: Option<&[bool]>, seed: u64, component: &str) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(GrridgeError::InvalidArgument(format!("fold count {k} outside 2..={n}")));
    }
    let mut rng = component_rng(seed, component);
    let order: Vec<usize> = match labels {
        Some(labels) => {
            if labels.len() != n {
                return Err(GrridgeError::DimensionMismatch { what: "fold labels", expected: n, got: labels.len() });
            }
            let mut neg: Vec<usize> = (0..n).filter(|&i| !labels[i]).collect();
            let mut pos: Vec<usize> = (0..n).filter(|&i| labels[i]).collect();
            neg.shuffle(&mut rng);
            pos.shuffle(&mut rng);
            neg.into_iter().chain(pos).collect()
        }
        None => {
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(&mut rng);
            all
        }
    };
    let mut assignments = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldPlan { assignments, k, seed, stratified: labels.is_some() })
}

impl FoldPlan {
    /// Wraps explicit assignments; every fold in `0..k` must be non-empty.
    pub fn from_assignments(assignments: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(GrridgeError::InvalidArgument(format!("fold count {k} below 2")));
        }
        let mut counts = vec![0usize; k];
        for &a in &assignments {
            if a >= k {
                return Err(GrridgeError::InvalidArgument(format!("fold index {a} out of range for {k} folds")));
            }
            counts[a] += 1;
        }
        if let Some(f) = counts.iter().position(|&c| c == 0) {
            return Err(GrridgeError::InvalidArgument(format!("fold {f} is empty")));
        }
        Ok(Self { assignments, k, seed: 0, stratified: false })
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stratified(&self) -> bool {
        self.stratified
    }

    pub fn n_samples(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_loocv(&self) -> bool {
        self.k == self.assignments.len()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// The same plan after reordering samples: sample `i` of the new order is
    /// sample `perm[i]` of the old one.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.assignments.len() {
            return Err(GrridgeError::DimensionMismatch {
                what: "permutation",
                expected: self.assignments.len(),
                got: perm.len(),
            });
        }
        Ok(Self { assignments: perm.iter().map(|&i| self.assignments[i]).collect(), ..self.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_balanced() {
        let plan = make_folds(10, 5, None, 1).unwrap();
        assert_eq!(plan.fold_sizes(), vec![2; 5]);
        let plan = make_folds(23, 4, None, 1).unwrap();
        let sizes = plan.fold_sizes();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn loocv_singletons() {
        let plan = make_folds(44, 44, None, 3).unwrap();
        assert!(plan.is_loocv());
        assert_eq!(plan.fold_sizes(), vec![1; 44]);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = make_folds(50, 10, None, 9).unwrap();
        assert_eq!(a, make_folds(50, 10, None, 9).unwrap());
        assert_ne!(a.assignments(), make_folds(50, 10, None, 10).unwrap().assignments());
    }

    #[test]
    fn stratified_keeps_classes() {
        let labels: Vec<bool> = (0..37).map(|i| i % 3 == 0).collect();
        let plan = make_folds(37, 5, Some(&labels), 4).unwrap();
        assert!(plan.stratified());
        let sizes = plan.fold_sizes();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for f in 0..5 {
            let members = plan.test_indices(f);
            let pos = members.iter().filter(|&&i| labels[i]).count();
            assert!((2..=3).contains(&pos), "fold {f} has {pos} positives");
            assert!(members.iter().any(|&i| !labels[i]));
        }
    }

    #[test]
    fn out_of_range() {
        assert!(make_folds(5, 1, None, 0).is_err());
        assert!(make_folds(5, 6, None, 0).is_err());
        assert!(FoldPlan::from_assignments(vec![0, 0, 2], 3).is_err());
    }
}
