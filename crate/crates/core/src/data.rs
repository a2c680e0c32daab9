//! Design matrix and response containers.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GrridgeError, Result};

/// An n×p covariate matrix with sample rows and variable columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    variable_ids: Vec<String>,
    sample_ids: Vec<String>,
}

impl DesignMatrix {
    pub fn new(values: DMatrix<f64>, variable_ids: Vec<String>, sample_ids: Vec<String>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 {
            return Err(GrridgeError::InvalidArgument(format!("design needs at least 2 samples, got {n}")));
        }
        if p < 1 {
            return Err(GrridgeError::InvalidArgument("design has no variables".into()));
        }
        if variable_ids.len() != p {
            return Err(GrridgeError::DimensionMismatch { what: "variable ids", expected: p, got: variable_ids.len() });
        }
        if sample_ids.len() != n {
            return Err(GrridgeError::DimensionMismatch { what: "sample ids", expected: n, got: sample_ids.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GrridgeError::NonFinite("design matrix"));
        }
        ensure_unique(&variable_ids, "variable")?;
        ensure_unique(&sample_ids, "sample")?;
        Ok(Self { values, variable_ids, sample_ids })
    }

    /// Builds a design with generated ids `v1..vp` and `s1..sn`.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let (n, p) = values.shape();
        let vars = (1..=p).map(|k| format!("v{k}")).collect();
        let samples = (1..=n).map(|i| format!("s{i}")).collect();
        Self::new(values, vars, samples)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn variable_ids(&self) -> &[String] {
        &self.variable_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let values = self.values.select_rows(rows);
        let samples = rows.iter().map(|&i| self.sample_ids[i].clone()).collect();
        Self::new(values, self.variable_ids.clone(), samples)
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let values = self.values.select_columns(cols);
        let vars = cols.iter().map(|&k| self.variable_ids[k].clone()).collect();
        Self::new(values, vars, self.sample_ids.clone())
    }
}

fn ensure_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(GrridgeError::InvalidArgument(format!("duplicate {what} id '{id}'")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    kind: ResponseKind,
    values: DVector<f64>,
}

impl Response {
    /// A 0/1 response. Both classes must be present.
    pub fn binary(values: DVector<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| **v != 0.0 && **v != 1.0) {
            return Err(GrridgeError::InvalidResponse(format!("value {v} at position {} is not 0 or 1", i + 1)));
        }
        let ones = values.iter().filter(|v| **v == 1.0).count();
        if ones == 0 || ones == values.len() {
            return Err(GrridgeError::SingleClass);
        }
        Ok(Self { kind: ResponseKind::Binary, values })
    }

    pub fn continuous(values: DVector<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GrridgeError::NonFinite("response"));
        }
        if values.is_empty() {
            return Err(GrridgeError::InvalidResponse("empty response".into()));
        }
        Ok(Self { kind: ResponseKind::Continuous, values })
    }

    pub fn new(kind: ResponseKind, values: DVector<f64>) -> Result<Self> {
        match kind {
            ResponseKind::Binary => Self::binary(values),
            ResponseKind::Continuous => Self::continuous(values),
        }
    }

    pub fn kind(&self) -> ResponseKind {
        self.kind
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let values = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.values[i]));
        Self::new(self.kind, values)
    }

    /// Binary labels as booleans; `None` for continuous responses.
    pub fn labels(&self) -> Option<Vec<bool>> {
        match self.kind {
            ResponseKind::Binary => Some(self.values.iter().map(|v| *v == 1.0).collect()),
            ResponseKind::Continuous => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_single_class_and_non_binary() {
        assert!(matches!(Response::binary(DVector::from_vec(vec![0.0, 0.0, 0.0])), Err(GrridgeError::SingleClass)));
        let err = Response::binary(DVector::from_vec(vec![0.0, 2.0, 1.0])).unwrap_err();
        assert!(err.to_string().contains("position 2"));
    }

    #[test]
    fn design_invariants() {
        let m = DMatrix::from_element(1, 3, 0.0);
        assert!(DesignMatrix::from_matrix(m).is_err());
        let m = DMatrix::from_element(3, 2, 1.0);
        let dup = DesignMatrix::new(m.clone(), vec!["a".into(), "a".into()], vec!["1".into(), "2".into(), "3".into()]);
        assert!(dup.is_err());
        let mut bad = m;
        bad[(0, 0)] = f64::NAN;
        assert!(DesignMatrix::from_matrix(bad).is_err());
    }
}
