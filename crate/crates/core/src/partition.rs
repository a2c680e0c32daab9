//! Disjoint, exhaustive groupings of variable indices.

use serde::{Deserialize, Serialize};

use crate::error::{GrridgeError, Result};

/// Required direction of the group variances τ²_g over the group index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotone {
    #[default]
    None,
    Increasing,
    Decreasing,
}

impl std::str::FromStr for Monotone {
    type Err = GrridgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Monotone::None),
            "increasing" | "inc" => Ok(Monotone::Increasing),
            "decreasing" | "dec" => Ok(Monotone::Decreasing),
            other => Err(GrridgeError::InvalidArgument(format!("unknown monotone direction '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr")]
pub struct Partition {
    id: String,
    group_of: Vec<usize>,
    labels: Vec<String>,
    #[serde(skip_serializing)]
    sizes: Vec<usize>,
    monotone: Monotone,
}

#[derive(Deserialize)]
struct PartitionRepr {
    id: String,
    group_of: Vec<usize>,
    labels: Vec<String>,
    #[serde(default)]
    monotone: Monotone,
}

impl TryFrom<PartitionRepr> for Partition {
    type Error = GrridgeError;

    fn try_from(r: PartitionRepr) -> Result<Self> {
        Partition::new(r.id, r.group_of, r.labels, r.monotone)
    }
}

impl Partition {
    /// `group_of[k]` is the group of variable k; every group in `0..labels.len()`
    /// must be non-empty.
    pub fn new(id: impl Into<String>, group_of: Vec<usize>, labels: Vec<String>, monotone: Monotone) -> Result<Self> {
        let id = id.into();
        if group_of.is_empty() {
            return Err(GrridgeError::InvalidPartition(format!("partition '{id}' covers no variables")));
        }
        let g_count = labels.len();
        let mut sizes = vec![0usize; g_count];
        for (k, &g) in group_of.iter().enumerate() {
            if g >= g_count {
                return Err(GrridgeError::InvalidPartition(format!(
                    "partition '{id}': variable {k} assigned to group {g}, but only {g_count} groups"
                )));
            }
            sizes[g] += 1;
        }
        if let Some(g) = sizes.iter().position(|&s| s == 0) {
            return Err(GrridgeError::InvalidPartition(format!(
                "partition '{id}': group {g} ('{}') is empty",
                labels[g]
            )));
        }
        Ok(Self { id, group_of, labels, sizes, monotone })
    }

    /// Builds from explicit member lists, which must partition `0..p`.
    pub fn from_members(
        id: impl Into<String>,
        members: &[Vec<usize>],
        labels: Vec<String>,
        monotone: Monotone,
        p: usize,
    ) -> Result<Self> {
        let id = id.into();
        if members.len() != labels.len() {
            return Err(GrridgeError::DimensionMismatch {
                what: "group labels",
                expected: members.len(),
                got: labels.len(),
            });
        }
        let mut group_of = vec![usize::MAX; p];
        for (g, m) in members.iter().enumerate() {
            for &k in m {
                if k >= p {
                    return Err(GrridgeError::InvalidPartition(format!("partition '{id}': variable {k} out of range")));
                }
                if group_of[k] != usize::MAX {
                    return Err(GrridgeError::InvalidPartition(format!(
                        "partition '{id}': variable {k} in two groups"
                    )));
                }
                group_of[k] = g;
            }
        }
        if let Some(k) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(GrridgeError::InvalidPartition(format!("partition '{id}': variable {k} not covered")));
        }
        Self::new(id, group_of, labels, monotone)
    }

    /// All variables in one group.
    pub fn single(id: impl Into<String>, p: usize) -> Result<Self> {
        Self::new(id, vec![0; p], vec!["all".to_string()], Monotone::None)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n_vars(&self) -> usize {
        self.group_of.len()
    }

    pub fn n_groups(&self) -> usize {
        self.labels.len()
    }

    pub fn group_of(&self) -> &[usize] {
        &self.group_of
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn monotone(&self) -> Monotone {
        self.monotone
    }

    pub fn with_monotone(mut self, monotone: Monotone) -> Self {
        self.monotone = monotone;
        self
    }

    /// Variable indices of each group, ascending within a group.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (k, &g) in self.group_of.iter().enumerate() {
            out[g].push(k);
        }
        out
    }

    /// Expands per-group values to per-variable values.
    pub fn expand(&self, per_group: &[f64]) -> Result<Vec<f64>> {
        if per_group.len() != self.n_groups() {
            return Err(GrridgeError::DimensionMismatch {
                what: "per-group values",
                expected: self.n_groups(),
                got: per_group.len(),
            });
        }
        Ok(self.group_of.iter().map(|&g| per_group[g]).collect())
    }
}
