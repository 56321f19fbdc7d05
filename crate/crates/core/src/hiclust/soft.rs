//! Level-1 overlapping clusters from density-ordered candidates.

use super::ClusterSet;
use crate::encoder::PairProbTable;
use crate::error::{Error, Result};
use crate::graph::LevelGraph;

/// `(density, id)` ordering: `v` dominates `u` when it is denser, or equally
/// dense with the larger id.
fn dominates(densities: &[f64], v: usize, u: usize) -> bool {
    match densities[v].partial_cmp(&densities[u]) {
        Some(std::cmp::Ordering::Greater) => true,
        Some(std::cmp::Ordering::Equal) => v > u,
        _ => false,
    }
}

/// The candidate of every node: itself plus each scored partner that
/// dominates it and clears `p_tau`. Members ascending.
pub fn candidate_clusters(
    n: usize,
    probs: &PairProbTable,
    densities: &[f64],
    p_tau: f64,
) -> Result<Vec<Vec<usize>>> {
    if densities.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: densities.len(),
        });
    }
    let partners = probs.partners(n);
    Ok((0..n)
        .map(|u| {
            let mut c: Vec<usize> = partners[u]
                .iter()
                .filter(|&&(v, p)| p > p_tau && dominates(densities, v, u))
                .map(|&(v, _)| v)
                .collect();
            c.push(u);
            c.sort_unstable();
            c
        })
        .collect())
}

fn is_strict_subset(a: &[usize], b: &[usize]) -> bool {
    a.len() < b.len() && a.iter().all(|x| b.binary_search(x).is_ok())
}

pub fn soft_cluster_level1(
    graph: &LevelGraph,
    probs: &PairProbTable,
    densities: &[f64],
    p_tau: f64,
) -> Result<ClusterSet> {
    if graph.level() != 1 {
        return Err(Error::WrongLevel(format!(
            "soft clustering runs at level 1, got {}",
            graph.level()
        )));
    }
    let n = graph.len();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut candidates = candidate_clusters(n, probs, densities, p_tau)?;
    candidates.sort();
    candidates.dedup();

    // containing[v] lists candidates holding v; a superset of `c` must hold every member of `c`.
    let mut containing = vec![Vec::new(); n];
    for (i, c) in candidates.iter().enumerate() {
        for &v in c {
            containing[v].push(i);
        }
    }
    let mut kept: Vec<Vec<usize>> = Vec::new();
    for c in &candidates {
        if c.len() == 1 {
            continue;
        }
        let rarest = *c.iter().min_by_key(|&&v| containing[v].len()).expect("non-empty");
        let dominated = containing[rarest]
            .iter()
            .any(|&j| is_strict_subset(c, &candidates[j]));
        if !dominated {
            kept.push(c.clone());
        }
    }

    // Uncovered nodes join the cluster of their strongest covered partner.
    let mut covered = vec![false; n];
    for c in &kept {
        for &v in c {
            covered[v] = true;
        }
    }
    let mut first_cluster = vec![usize::MAX; n];
    let mut order: Vec<usize> = (0..kept.len()).collect();
    order.sort_by(|&a, &b| kept[a].cmp(&kept[b]));
    for &ci in order.iter().rev() {
        for &v in &kept[ci] {
            first_cluster[v] = ci;
        }
    }
    let partners = probs.partners(n);
    let mut additions: Vec<(usize, usize)> = Vec::new();
    let mut singletons = Vec::new();
    for u in (0..n).filter(|&u| !covered[u]) {
        let mut best: Option<(usize, f64)> = None;
        for &(v, p) in &partners[u] {
            if covered[v] && best.is_none_or(|(_, bp)| p > bp) {
                best = Some((v, p));
            }
        }
        match best {
            Some((v, _)) => additions.push((first_cluster[v], u)),
            None => singletons.push(vec![u]),
        }
    }
    for (ci, u) in additions {
        kept[ci].push(u);
    }
    kept.extend(singletons);
    Ok(ClusterSet::new(1, kept, true))
}
