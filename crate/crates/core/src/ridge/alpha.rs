use nalgebra::DMatrix;

use super::moments::MomentFactors;
use crate::error::{GrridgeError, Result};
use crate::partition::Partition;

/// Block sums of squares of `D = L R` without forming `D`:
/// `α_gh = [(L_g' L_g) ∘ (R_h R_h')]_Σ`, with `L_g` the rows of `left` in row
/// group g and `R_h` the columns of `right` in column group h. Only n×n
/// products are formed.
pub fn hadamard_alpha(
    left: &DMatrix<f64>,
    right: &DMatrix<f64>,
    row_groups: &[Vec<usize>],
    col_groups: &[Vec<usize>],
) -> Result<DMatrix<f64>> {
    let n = left.ncols();
    if right.nrows() != n {
        return Err(GrridgeError::DimensionMismatch {
            what: "inner dimension of L R",
            expected: n,
            got: right.nrows(),
        });
    }
    check_cover(row_groups, left.nrows(), "row")?;
    check_cover(col_groups, right.ncols(), "column")?;

    let left_grams: Vec<DMatrix<f64>> = row_groups
        .iter()
        .map(|g| {
            let lg = left.select_rows(g);
            lg.tr_mul(&lg)
        })
        .collect();
    let right_grams: Vec<DMatrix<f64>> = col_groups
        .iter()
        .map(|h| {
            let rh = right.select_columns(h);
            &rh * rh.transpose()
        })
        .collect();

    Ok(DMatrix::from_fn(row_groups.len(), col_groups.len(), |g, h| left_grams[g].dot(&right_grams[h])))
}

fn check_cover(groups: &[Vec<usize>], p: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; p];
    for g in groups {
        for &k in g {
            if k >= p || seen[k] {
                return Err(GrridgeError::InvalidPartition(format!(
                    "{what} groups are not a partition of 0..{p} (index {k})"
                )));
            }
            seen[k] = true;
        }
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(GrridgeError::InvalidPartition(format!("{what} groups miss variable {k}")));
    }
    Ok(())
}

pub fn alpha_matrix(
    factors: &MomentFactors,
    row_partition: &Partition,
    col_partition: &Partition,
) -> Result<DMatrix<f64>> {
    let p = factors.n_vars();
    for part in [row_partition, col_partition] {
        if part.n_vars() != p {
            return Err(GrridgeError::DimensionMismatch { what: "partition size", expected: p, got: part.n_vars() });
        }
    }
    hadamard_alpha(&factors.left, &factors.right, &row_partition.members(), &col_partition.members())
}
