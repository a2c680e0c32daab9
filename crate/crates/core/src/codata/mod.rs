//! Partitions built from co-data, monotone smoothing of group variances, and
//! the prior feature filter.

mod builders;
mod filter;
mod isotonic;

use serde::{Deserialize, Serialize};

pub use builders::{
    nonuniform_sizes, partition_by_labels, partition_by_quantiles, partition_by_rank, partition_by_rank_nonuniform,
};
pub use filter::{benjamini_hochberg, filter_features, welch_t_test, FilterResult};
pub use isotonic::isotonic_fit;

use crate::error::{GrridgeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoDataKind {
    Pvalue,
    Variance,
    #[default]
    Generic,
}

/// One numeric co-data source: a value per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct CoDataVector {
    pub name: String,
    pub variable_ids: Vec<String>,
    pub values: Vec<f64>,
    pub kind: CoDataKind,
}

impl CoDataVector {
    pub fn new(name: impl Into<String>, variable_ids: Vec<String>, values: Vec<f64>, kind: CoDataKind) -> Result<Self> {
        if variable_ids.len() != values.len() {
            return Err(GrridgeError::DimensionMismatch {
                what: "co-data values",
                expected: variable_ids.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GrridgeError::NonFinite("co-data values"));
        }
        Ok(Self { name: name.into(), variable_ids, values, kind })
    }

    /// Unnamed co-data with ids `v1..vp`.
    pub fn from_values(values: Vec<f64>, kind: CoDataKind) -> Result<Self> {
        let ids = (1..=values.len()).map(|k| format!("v{k}")).collect();
        Self::new("codata", ids, values, kind)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Variable indices sorted by value ascending, ties by index.
    pub fn ascending_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]).then(a.cmp(&b)));
        order
    }
}
