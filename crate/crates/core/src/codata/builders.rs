use std::collections::HashMap;

use super::{CoDataKind, CoDataVector};
use crate::error::{GrridgeError, Result};
use crate::partition::{Monotone, Partition};

fn blocks_to_partition(
    id: &str,
    order: &[usize],
    sizes: &[usize],
    prefix: &str,
    monotone: Monotone,
) -> Result<Partition> {
    let p = order.len();
    let mut group_of = vec![0; p];
    let mut start = 0;
    for (g, &size) in sizes.iter().enumerate() {
        for &k in &order[start..start + size] {
            group_of[k] = g;
        }
        start += size;
    }
    debug_assert_eq!(start, p);
    let labels = (1..=sizes.len()).map(|g| format!("{prefix}{g}")).collect();
    Partition::new(id, group_of, labels, monotone)
}

/// G contiguous blocks of near-equal size over the ascending order of the
/// co-data; the first `p mod G` groups get one extra variable.
pub fn partition_by_quantiles(codata: &CoDataVector, groups: usize) -> Result<Partition> {
    let p = codata.len();
    if groups == 0 || groups > p {
        return Err(GrridgeError::InvalidArgument(format!("need 1 <= G <= p, got G = {groups}, p = {p}")));
    }
    let base = p / groups;
    let extra = p % groups;
    let sizes: Vec<usize> = (0..groups).map(|g| base + usize::from(g < extra)).collect();
    blocks_to_partition(&codata.name, &codata.ascending_order(), &sizes, "q", Monotone::None)
}

/// Groups of `s` consecutive ranks (ascending values, so the smallest p-values
/// come first); the final group holds the remainder. For p-value co-data the
/// group variances are required to decrease with the group index.
pub fn partition_by_rank(codata: &CoDataVector, s: usize) -> Result<Partition> {
    let p = codata.len();
    if s == 0 || s > p {
        return Err(GrridgeError::InvalidArgument(format!("need 1 <= s <= p, got s = {s}, p = {p}")));
    }
    let mut sizes = vec![s; p / s];
    if !p.is_multiple_of(s) {
        sizes.push(p % s);
    }
    blocks_to_partition(&codata.name, &codata.ascending_order(), &sizes, "r", rank_monotone(codata.kind))
}

fn rank_monotone(kind: CoDataKind) -> Monotone {
    match kind {
        CoDataKind::Pvalue => Monotone::Decreasing,
        _ => Monotone::None,
    }
}

/// Group sizes growing geometrically from `s_min`.
///
/// When `s_min * g_max >= p` this is the uniform schedule of `partition_by_rank`.
/// Otherwise exactly `g_max` groups are used, with ratio `r > 1` solving
/// `s_min * Σ_{i<g_max} r^i = p`; cumulative boundaries are rounded to the
/// nearest integer, which keeps every size at least `s_min`.
pub fn nonuniform_sizes(p: usize, s_min: usize, g_max: usize) -> Result<Vec<usize>> {
    if s_min == 0 || g_max == 0 {
        return Err(GrridgeError::InvalidArgument(
            "minimum group size and maximum group count must be positive".into(),
        ));
    }
    if p < s_min {
        return Err(GrridgeError::Infeasible(format!("p = {p} is smaller than the minimum group size {s_min}")));
    }
    if s_min * g_max >= p {
        let mut sizes = vec![s_min; p / s_min];
        if !p.is_multiple_of(s_min) {
            sizes.push(p % s_min);
        }
        return Ok(sizes);
    }
    if g_max == 1 {
        return Ok(vec![p]);
    }
    let target = p as f64 / s_min as f64;
    let geometric_sum = |r: f64| (0..g_max).fold((0.0, 1.0), |(acc, pow), _| (acc + pow, pow * r)).0;
    let (mut lo, mut hi) = (1.0_f64, 2.0_f64);
    while geometric_sum(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if geometric_sum(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let r = 0.5 * (lo + hi);

    let mut sizes = Vec::with_capacity(g_max);
    let (mut cum, mut pow, mut prev) = (0.0_f64, 1.0_f64, 0usize);
    for _ in 0..g_max - 1 {
        cum += s_min as f64 * pow;
        pow *= r;
        let boundary = (cum.round() as usize).min(p);
        sizes.push(boundary - prev);
        prev = boundary;
    }
    sizes.push(p - prev);
    Ok(sizes)
}

/// Rank-based groups whose sizes grow from `s_min` for the most extreme
/// (smallest) values, using at most `g_max` groups.
pub fn partition_by_rank_nonuniform(codata: &CoDataVector, s_min: usize, g_max: usize) -> Result<Partition> {
    let sizes = nonuniform_sizes(codata.len(), s_min, g_max)?;
    blocks_to_partition(&codata.name, &codata.ascending_order(), &sizes, "r", rank_monotone(codata.kind))
}

/// One group per distinct label, in order of first appearance.
pub fn partition_by_labels(id: &str, labels: &[String]) -> Result<Partition> {
    if labels.is_empty() {
        return Err(GrridgeError::InvalidArgument("no labels given".into()));
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut names = Vec::new();
    let group_of = labels
        .iter()
        .map(|l| {
            *index.entry(l.as_str()).or_insert_with(|| {
                names.push(l.clone());
                names.len() - 1
            })
        })
        .collect();
    Partition::new(id, group_of, names, Monotone::None)
}
