//! Clustering metrics, the k-means baseline, and planted synthetic instances.

mod kmeans;
mod synth;

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hiclust::{ClusterSet, Hierarchy};
use crate::labels::{GoldHierarchyLabels, LevelLabels};
use crate::matrix::Matrix;

pub use kmeans::{kmeans_baseline, KMEANS_MAX_ITERS, KMEANS_TOL};
pub use synth::{synth_graph, SynthConfig, SynthInstance};

pub const METRIC: &str = "pairwise_same_cluster_accuracy";

/// Per-node cluster lists of a clustering over nodes `0..n`.
pub fn cluster_set_labels(pred: &ClusterSet, n: usize) -> Result<LevelLabels> {
    let mut assignment = vec![Vec::new(); n];
    let mut covered = 0;
    for (c, members) in pred.clusters().iter().enumerate() {
        for &v in members {
            if v >= n {
                let nodes = pred.clusters().iter().flatten().max().map_or(0, |m| m + 1);
                return Err(Error::UniverseMismatch { pred: nodes, gold: n });
            }
            if assignment[v].is_empty() {
                covered += 1;
            }
            assignment[v].push(c);
        }
    }
    if covered != n {
        return Err(Error::UniverseMismatch { pred: covered, gold: n });
    }
    LevelLabels::new((0..pred.len()).map(|c| c.to_string()).collect(), assignment)
}

/// Fraction of unordered pairs on which both labelings agree about sharing a
/// cluster. With fewer than two nodes there is nothing to disagree on and
/// the result is 1.
pub fn pairwise_agreement(a: &LevelLabels, b: &LevelLabels) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::UniverseMismatch {
            pred: a.len(),
            gold: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Ok(1.0);
    }
    let mut agree = 0u64;
    for u in 0..n {
        for v in u + 1..n {
            if a.same(u, v) == b.same(u, v) {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / (n * (n - 1) / 2) as f64)
}

pub fn pairwise_accuracy(pred: &ClusterSet, gold: &LevelLabels) -> Result<f64> {
    pairwise_agreement(&cluster_set_labels(pred, gold.len())?, gold)
}

/// The papers of every level-`level` cluster as a clustering of the papers.
/// Levels past the top of the hierarchy put every paper in one cluster.
pub fn predicted_partition(h: &Hierarchy, level: usize) -> ClusterSet {
    if level >= 1 && level < h.num_levels() {
        ClusterSet::new(level, h.levels[level].all_members().to_vec(), level == 1)
    } else {
        ClusterSet::new(level, vec![(0..h.base().len()).collect()], false)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelRow {
    pub level: usize,
    pub accuracy: f64,
    pub kmeans_accuracy: f64,
    pub predicted_clusters: usize,
    pub gold_clusters: usize,
    /// False when the hierarchy stopped below this level.
    pub predicted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub metric: String,
    pub seed: u64,
    pub papers: usize,
    pub levels: Vec<LevelRow>,
    pub average: f64,
    pub kmeans_average: f64,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Scores every gold level against the hierarchy and against k-means on the
/// base embeddings with `k` set to that level's gold cluster count.
pub fn evaluate(h: &Hierarchy, gold: &GoldHierarchyLabels, x: &Matrix, seed: u64) -> Result<EvalReport> {
    let n = h.base().len();
    if gold.num_papers() != n {
        return Err(Error::UniverseMismatch {
            pred: n,
            gold: gold.num_papers(),
        });
    }
    let mut levels = Vec::with_capacity(gold.num_levels());
    for level in 1..=gold.num_levels() {
        let g = gold.level(level);
        let pred = predicted_partition(h, level);
        let k = g.clusters().len().clamp(1, n);
        let km = kmeans_baseline(x, k, seed)?;
        levels.push(LevelRow {
            level,
            accuracy: pairwise_accuracy(&pred, g)?,
            kmeans_accuracy: pairwise_accuracy(&km, g)?,
            predicted_clusters: pred.len(),
            gold_clusters: g.clusters().len(),
            predicted: level < h.num_levels(),
        });
    }
    let mean = |f: fn(&LevelRow) -> f64| levels.iter().map(f).sum::<f64>() / levels.len() as f64;
    Ok(EvalReport {
        metric: METRIC.into(),
        seed,
        papers: n,
        average: mean(|r| r.accuracy),
        kmeans_average: mean(|r| r.kmeans_accuracy),
        levels,
    })
}
