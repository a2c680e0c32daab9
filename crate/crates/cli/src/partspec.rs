//! Partition specifications: `kind:column[:param=value...]`, several separated
//! by commas. Kinds are `rank` (`s=`), `rank_nonuniform` (`min=`,
//! `max_groups=`), `quantile` (`g=`) and `labels`. Every kind also accepts
//! `monotone=none|increasing|decreasing` and `id=`; the numeric kinds accept
//! `type=pvalue|variance|generic`.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use grridge::codata::{partition_by_labels, partition_by_quantiles, partition_by_rank, partition_by_rank_nonuniform};
use grridge::io::{CoDataColumn, CoDataTable};
use grridge::{CoDataKind, CoDataVector, Monotone, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecKind {
    Rank,
    RankNonuniform,
    Quantile,
    Labels,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    pub kind: SpecKind,
    pub column: String,
    pub params: BTreeMap<String, String>,
}

impl PartitionSpec {
    fn allowed(&self) -> &'static [&'static str] {
        match self.kind {
            SpecKind::Rank => &["s", "monotone", "id", "type"],
            SpecKind::RankNonuniform => &["min", "max_groups", "monotone", "id", "type"],
            SpecKind::Quantile => &["g", "monotone", "id", "type"],
            SpecKind::Labels => &["monotone", "id"],
        }
    }

    fn usize_param(&self, key: &str) -> Result<usize> {
        let text = self.params.get(key).ok_or_else(|| anyhow!("partition on '{}' needs {key}=", self.column))?;
        text.parse().map_err(|_| anyhow!("partition on '{}': {key}={text} is not a positive integer", self.column))
    }

    pub fn id(&self) -> &str {
        self.params.get("id").map_or(self.column.as_str(), String::as_str)
    }

    fn codata_kind(&self) -> Result<CoDataKind> {
        match self.params.get("type").map(String::as_str) {
            None | Some("generic") => Ok(CoDataKind::Generic),
            Some("pvalue") => Ok(CoDataKind::Pvalue),
            Some("variance") => Ok(CoDataKind::Variance),
            Some(other) => bail!("partition on '{}': unknown type '{other}'", self.column),
        }
    }

    /// Builds the partition from co-data rows aligned with the design's
    /// variables.
    pub fn build(&self, table: &CoDataTable) -> Result<Partition> {
        let column = table.column(&self.column)?;
        let part = match (self.kind, column) {
            (SpecKind::Labels, CoDataColumn::Labels(labels)) => partition_by_labels(self.id(), labels)?,
            (SpecKind::Labels, CoDataColumn::Numeric(values)) => {
                let labels: Vec<String> = values.iter().map(f64::to_string).collect();
                partition_by_labels(self.id(), &labels)?
            }
            (_, CoDataColumn::Labels(_)) => {
                bail!("co-data column '{}' is not numeric; use labels:{}", self.column, self.column)
            }
            (kind, CoDataColumn::Numeric(values)) => {
                let codata =
                    CoDataVector::new(self.id(), table.variable_ids.clone(), values.clone(), self.codata_kind()?)?;
                match kind {
                    SpecKind::Rank => partition_by_rank(&codata, self.usize_param("s")?)?,
                    SpecKind::RankNonuniform => partition_by_rank_nonuniform(
                        &codata,
                        self.usize_param("min")?,
                        self.usize_param("max_groups")?,
                    )?,
                    SpecKind::Quantile => partition_by_quantiles(&codata, self.usize_param("g")?)?,
                    SpecKind::Labels => unreachable!(),
                }
            }
        };
        Ok(match self.params.get("monotone") {
            Some(m) => part.with_monotone(m.parse::<Monotone>()?),
            None => part,
        })
    }
}

fn parse_one(text: &str) -> Result<PartitionSpec> {
    let mut parts = text.split(':');
    let kind = match parts.next().map(str::trim) {
        Some("rank") => SpecKind::Rank,
        Some("rank_nonuniform") => SpecKind::RankNonuniform,
        Some("quantile") => SpecKind::Quantile,
        Some("labels") => SpecKind::Labels,
        Some(other) => bail!("unknown partition kind '{other}' (expected rank, rank_nonuniform, quantile or labels)"),
        None => bail!("empty partition spec"),
    };
    let column =
        parts.next().map(str::trim).filter(|c| !c.is_empty()).ok_or_else(|| anyhow!("'{text}': missing column"))?;
    let mut spec = PartitionSpec { kind, column: column.to_string(), params: BTreeMap::new() };
    for p in parts {
        let (k, v) = p.split_once('=').ok_or_else(|| anyhow!("'{text}': expected param=value, found '{p}'"))?;
        let key = k.trim().to_string();
        if !spec.allowed().contains(&key.as_str()) {
            bail!("'{text}': unknown parameter '{key}' (allowed: {})", spec.allowed().join(", "));
        }
        if spec.params.insert(key.clone(), v.trim().to_string()).is_some() {
            bail!("'{text}': parameter '{key}' given twice");
        }
    }
    Ok(spec)
}

/// Parses a comma-separated list of partition specs.
pub fn parse_specs(text: &str) -> Result<Vec<PartitionSpec>> {
    let specs: Vec<PartitionSpec> = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_one(s.trim()).with_context(|| "parsing --partitions".to_string()))
        .collect::<Result<_>>()?;
    if specs.is_empty() {
        bail!("no partitions given");
    }
    let mut ids: Vec<&str> = specs.iter().map(PartitionSpec::id).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        bail!("two partitions share the id '{}'; set id= on one of them", w[0]);
    }
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_example() {
        let specs = parse_specs("rank:pvals:s=10,labels:annotation").unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].kind, SpecKind::Rank);
        assert_eq!(specs[0].column, "pvals");
        assert_eq!(specs[0].params["s"], "10");
        assert_eq!(specs[1].kind, SpecKind::Labels);
        assert_eq!(specs[1].column, "annotation");
        assert!(specs[1].params.is_empty());
    }

    #[test]
    fn all_kinds_and_flags() {
        let specs =
            parse_specs("rank_nonuniform:p:min=10:max_groups=5:type=pvalue, quantile:v:g=4:monotone=increasing:id=var")
                .unwrap();
        assert_eq!(specs[0].kind, SpecKind::RankNonuniform);
        assert_eq!(specs[1].id(), "var");
        assert_eq!(specs[1].params["monotone"], "increasing");
    }

    #[test]
    fn rejects_bad_specs() {
        for bad in ["", "bogus:x", "rank", "rank:p:t=3", "rank:p:s", "labels:a,labels:a", "rank:p:s=1:s=2"] {
            assert!(parse_specs(bad).is_err(), "{bad}");
        }
        assert!(parse_specs("labels:a,labels:a:id=b").is_ok());
    }

    fn table() -> CoDataTable {
        CoDataTable {
            variable_ids: (1..=6).map(|i| format!("v{i}")).collect(),
            columns: vec![
                ("pvals".into(), CoDataColumn::Numeric(vec![0.5, 0.01, 0.9, 0.02, 0.3, 0.7])),
                ("annotation".into(), CoDataColumn::Labels(["a", "b", "a", "c", "b", "a"].map(String::from).to_vec())),
            ],
        }
    }

    #[test]
    fn builds_partitions() {
        let t = table();
        let specs = parse_specs("rank:pvals:s=2:type=pvalue,labels:annotation").unwrap();
        let rank = specs[0].build(&t).unwrap();
        assert_eq!(rank.group_of(), &[1, 0, 2, 0, 1, 2]);
        assert_eq!(rank.monotone(), Monotone::Decreasing);
        let labels = specs[1].build(&t).unwrap();
        assert_eq!(labels.n_groups(), 3);
        assert_eq!(labels.labels(), &["a", "b", "c"]);
        let q = parse_specs("quantile:pvals:g=3:monotone=none").unwrap()[0].build(&t).unwrap();
        assert_eq!(q.monotone(), Monotone::None);
        assert!(parse_specs("rank:annotation:s=2").unwrap()[0].build(&t).is_err());
        assert!(parse_specs("rank:missing:s=2").unwrap()[0].build(&t).is_err());
    }
}
