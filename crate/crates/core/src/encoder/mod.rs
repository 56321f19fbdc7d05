//! Graph encoder, pair scorer and node density.

pub(crate) mod gat;
mod params;
pub(crate) mod scorer;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LevelGraph;
use crate::matrix::{cosine, Matrix};

pub use params::{EncoderParams, EncoderShape};

/// One embedding row per level-graph node.
pub type NodeEmbeddings = Matrix;

/// Which node pairs get scored at a level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Pairs joined by an edge. At hard levels an isolated node is scored
    /// against every other node so it still has an argmax partner.
    #[default]
    Neighbors,
    AllPairs,
}

/// Same-cluster probabilities keyed by unordered node pair.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairProbTable {
    probs: BTreeMap<(usize, usize), f64>,
}

fn key(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

impl PairProbTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, u: usize, v: usize, p: f64) {
        self.probs.insert(key(u, v), p);
    }

    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        self.probs.get(&key(u, v)).copied()
    }

    pub fn require(&self, u: usize, v: usize) -> Result<f64> {
        self.get(u, v).ok_or(Error::MissingPair(u, v))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Pairs `(u, v, p)` with `u < v`, ascending.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.probs.iter().map(|(&(u, v), &p)| (u, v, p))
    }

    /// Scored partners of every node, ascending by partner.
    pub fn partners(&self, n: usize) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); n];
        for (u, v, p) in self.iter() {
            if u < n && v < n {
                out[u].push((v, p));
                out[v].push((u, p));
            }
        }
        for list in &mut out {
            list.sort_by_key(|&(v, _)| v);
        }
        out
    }
}

/// Embeddings, pair probabilities and densities for one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelScores {
    pub embeddings: NodeEmbeddings,
    pub probs: PairProbTable,
    pub densities: Vec<f64>,
}

/// Anything that can score a level for the clustering driver.
pub trait LevelScorer {
    fn score_level(&self, graph: &LevelGraph, scope: Scope) -> Result<LevelScores>;
}

impl LevelScorer for EncoderParams {
    fn score_level(&self, graph: &LevelGraph, scope: Scope) -> Result<LevelScores> {
        score_level(graph, self, scope)
    }
}

pub fn encode(graph: &LevelGraph, params: &EncoderParams) -> Result<NodeEmbeddings> {
    Ok(gat::forward(params, graph)?.output)
}

fn check_pair(h: &NodeEmbeddings, u: usize, v: usize, params: &EncoderParams) -> Result<()> {
    if u == v {
        return Err(Error::SelfPair(u));
    }
    let n = h.rows();
    if u >= n || v >= n {
        return Err(Error::NodeOutOfRange {
            index: u.max(v),
            len: n,
        });
    }
    if h.cols() != params.shape().hidden {
        return Err(Error::DimensionMismatch {
            expected: params.shape().hidden,
            found: h.cols(),
        });
    }
    Ok(())
}

/// P(u and v share a cluster) from the ordered concatenation `[h_u; h_v]`.
pub fn pair_prob(
    h: &NodeEmbeddings,
    u: usize,
    v: usize,
    params: &EncoderParams,
    level: usize,
) -> Result<f64> {
    check_pair(h, u, v, params)?;
    let trace = scorer::forward(params, level, h.row(u), h.row(v));
    Ok(scorer::softmax_same(trace.logits))
}

/// Mean of both concatenation orders; symmetric in `u` and `v`.
pub fn symmetrized_pair_prob(
    h: &NodeEmbeddings,
    u: usize,
    v: usize,
    params: &EncoderParams,
    level: usize,
) -> Result<f64> {
    let (a, b) = (u.min(v), u.max(v));
    Ok((pair_prob(h, a, b, params, level)? + pair_prob(h, b, a, params, level)?) / 2.0)
}

/// Similarity-weighted share of same-cluster neighbors; 0 for isolated nodes.
pub fn node_density(
    graph: &LevelGraph,
    h: &NodeEmbeddings,
    probs: &PairProbTable,
    u: usize,
) -> Result<f64> {
    let nbrs = graph.neighbors(u)?;
    if nbrs.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for &k in nbrs {
        sum += probs.require(u, k)? * cosine(h.row(u), h.row(k));
    }
    Ok(sum / nbrs.len() as f64)
}

pub fn densities(graph: &LevelGraph, h: &NodeEmbeddings, probs: &PairProbTable) -> Result<Vec<f64>> {
    (0..graph.len())
        .map(|u| node_density(graph, h, probs, u))
        .collect()
}

/// The unordered pairs scored at this level under `scope`, ascending.
pub fn scope_pairs(graph: &LevelGraph, scope: Scope) -> Vec<(usize, usize)> {
    let n = graph.len();
    match scope {
        Scope::AllPairs => (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect(),
        Scope::Neighbors => {
            let mut pairs = graph.edges().to_vec();
            if graph.level() > 1 && n > 1 {
                for u in 0..n {
                    if graph.adjacency()[u].is_empty() {
                        pairs.extend((0..n).filter(|&v| v != u).map(|v| key(u, v)));
                    }
                }
                pairs.sort_unstable();
                pairs.dedup();
            }
            pairs
        }
    }
}

pub fn score_level(graph: &LevelGraph, params: &EncoderParams, scope: Scope) -> Result<LevelScores> {
    let h = encode(graph, params)?;
    let mut probs = PairProbTable::new();
    for (u, v) in scope_pairs(graph, scope) {
        probs.insert(u, v, symmetrized_pair_prob(&h, u, v, params, graph.level())?);
    }
    // Density is neighborhood-defined, so neighbor pairs must be present.
    for &(u, v) in graph.edges() {
        if probs.get(u, v).is_none() {
            probs.insert(u, v, symmetrized_pair_prob(&h, u, v, params, graph.level())?);
        }
    }
    let densities = densities(graph, &h, &probs)?;
    Ok(LevelScores {
        embeddings: h,
        probs,
        densities,
    })
}
