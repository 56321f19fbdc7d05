use crate::encoder::{densities, scope_pairs, LevelScorer, LevelScores, PairProbTable, Scope};
use crate::error::{Error, Result};
use crate::graph::LevelGraph;
use crate::labels::{shares, GoldHierarchyLabels};

/// Scores pairs from gold labels: `same` when two nodes share a gold cluster
/// at their level, `different` otherwise. A hyper-node carries the gold
/// clusters of all its papers. Above the deepest gold level everything is
/// the same cluster. Embeddings are the level features.
#[derive(Clone, Debug)]
pub struct OracleScorer {
    labels: GoldHierarchyLabels,
    pub same: f64,
    pub different: f64,
}

impl OracleScorer {
    pub fn new(labels: GoldHierarchyLabels) -> Self {
        Self {
            labels,
            same: 0.99,
            different: 0.01,
        }
    }

    fn node_labels(&self, graph: &LevelGraph) -> Option<Vec<Vec<usize>>> {
        let level = graph.level();
        if level > self.labels.num_levels() {
            return None;
        }
        let gold = self.labels.level(level);
        Some(
            graph
                .all_members()
                .iter()
                .map(|m| {
                    let mut cs: Vec<usize> = m.iter().flat_map(|&p| gold.clusters_of(p).iter().copied()).collect();
                    cs.sort_unstable();
                    cs.dedup();
                    cs
                })
                .collect(),
        )
    }
}

impl LevelScorer for OracleScorer {
    fn score_level(&self, graph: &LevelGraph, scope: Scope) -> Result<LevelScores> {
        if graph.all_members().iter().flatten().any(|&p| p >= self.labels.num_papers()) {
            return Err(Error::Labels("graph has papers the labels do not cover".into()));
        }
        let node_labels = self.node_labels(graph);
        let mut probs = PairProbTable::new();
        let mut pairs = scope_pairs(graph, scope);
        pairs.extend_from_slice(graph.edges());
        for (u, v) in pairs {
            let same = node_labels.as_ref().is_none_or(|l| shares(&l[u], &l[v]));
            probs.insert(u, v, if same { self.same } else { self.different });
        }
        let embeddings = graph.features().clone();
        let densities = densities(graph, &embeddings, &probs)?;
        Ok(LevelScores {
            embeddings,
            probs,
            densities,
        })
    }
}
