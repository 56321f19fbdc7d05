use super::ClusterSet;
use crate::error::{Error, Result};
use crate::graph::LevelGraph;
use crate::matrix::Matrix;

/// Hyper-edges between clusters joined by at least one edge of the level.
/// Overlap alone never creates an edge, and there are no self-loops.
pub fn lift_edges(graph: &LevelGraph, clusters: &ClusterSet) -> Vec<(usize, usize)> {
    let mut of = vec![Vec::new(); graph.len()];
    for (ci, c) in clusters.clusters().iter().enumerate() {
        for &v in c {
            of[v].push(ci);
        }
    }
    let mut out = Vec::new();
    for &(u, v) in graph.edges() {
        for &a in &of[u] {
            for &b in &of[v] {
                if a != b {
                    out.push((a.min(b), a.max(b)));
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Densest member of a cluster, ties to the smaller id.
pub fn representative(cluster: &[usize], densities: &[f64]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for &z in cluster {
        let d = *densities.get(z).ok_or(Error::NodeOutOfRange {
            index: z,
            len: densities.len(),
        })?;
        best = match best {
            Some(b) if densities[b] > d || (densities[b] == d && b < z) => Some(b),
            _ => Some(z),
        };
    }
    best.ok_or(Error::EmptyCluster)
}

/// Hyper-node features: member mean plus the representative's embedding.
pub fn aggregate(clusters: &ClusterSet, h: &Matrix, densities: &[f64]) -> Result<Matrix> {
    let mut out = Matrix::zeros(clusters.len(), h.cols());
    for (ci, c) in clusters.clusters().iter().enumerate() {
        let k = representative(c, densities)?;
        let row = out.row_mut(ci);
        for &z in c {
            for (o, v) in row.iter_mut().zip(h.row(z)) {
                *o += v;
            }
        }
        let inv = 1.0 / c.len() as f64;
        for (o, v) in row.iter_mut().zip(h.row(k)) {
            *o = *o * inv + v;
        }
    }
    Ok(out)
}
