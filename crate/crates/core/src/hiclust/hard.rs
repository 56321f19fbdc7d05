use super::ClusterSet;
use crate::encoder::PairProbTable;
use crate::error::{Error, Result};
use crate::graph::LevelGraph;
use crate::union_find::DisjointSet;

/// Links every node to its highest-probability scored partner (ties to the
/// smaller id) and returns the connected components of those links.
pub fn hard_cluster(graph: &LevelGraph, probs: &PairProbTable) -> Result<ClusterSet> {
    if graph.level() < 2 {
        return Err(Error::WrongLevel("hard clustering runs above level 1".into()));
    }
    let n = graph.len();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut ds = DisjointSet::new(n);
    if n > 1 {
        let partners = probs.partners(n);
        for (u, list) in partners.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for &(v, p) in list {
                if best.is_none_or(|(_, bp)| p > bp) {
                    best = Some((v, p));
                }
            }
            let (v, _) = best.ok_or(Error::NoScoredPartner(u))?;
            ds.union(u, v);
        }
    }
    Ok(ClusterSet::new(graph.level(), ds.components(), false))
}
