//! The clustering objective over a teacher-forced hierarchy, with gradients.
//!
//! Level `l + 1` is built from the gold level-`l` clusters: the finest gold
//! clusters (overlap allowed) group the papers, and every coarser gold level
//! groups the previous hyper-nodes by the plurality cluster of their papers.
//! Hyper-node features come from the same aggregation the clustering driver
//! uses, so gradients reach the encoder through every level.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::losses::{bce, himulcon_with_grad, himulcon_loss, ContrastConfig, SupervisedPair};
use crate::encoder::gat::{self, EncodeTrace};
use crate::encoder::{densities, scope_pairs, scorer, EncoderParams, PairProbTable, Scope};
use crate::error::{Error, Result};
use crate::graph::LevelGraph;
use crate::hiclust::{aggregate, lift_edges, representative, ClusterSet};
use crate::labels::GoldHierarchyLabels;
use crate::matrix::Matrix;

/// Loss weights shared by training and gradient checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub alpha: f64,
    pub contrast: ContrastConfig,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            contrast: ContrastConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub cluster: f64,
    pub himulcon: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
struct HyperLevel {
    /// Gold grouping of the level below.
    clusters: ClusterSet,
    ids: Vec<String>,
    edges: Vec<(usize, usize)>,
    members: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct TrainingProblem {
    base: LevelGraph,
    labels: GoldHierarchyLabels,
    hyper: Vec<HyperLevel>,
    /// `containing[l][p]`: nodes of level `l + 1` whose members include paper `p`.
    containing: Vec<Vec<Vec<usize>>>,
    /// Pairs scored at every level in the forward pass.
    scope: Scope,
}

pub(crate) struct Forward {
    traces: Vec<EncodeTrace>,
    probs: Vec<PairProbTable>,
    /// Representative per cluster of each level below the top.
    reps: Vec<Vec<usize>>,
}

fn plurality(papers: &[usize], gold: &crate::labels::LevelLabels) -> usize {
    let mut counts = vec![0usize; gold.cluster_count()];
    for &p in papers {
        for &c in gold.clusters_of(p) {
            counts[c] += 1;
        }
    }
    // First maximum: ties go to the smaller cluster index.
    let mut best = 0;
    for (c, &k) in counts.iter().enumerate() {
        if k > counts[best] {
            best = c;
        }
    }
    best
}

impl TrainingProblem {
    pub fn new(base: LevelGraph, labels: GoldHierarchyLabels) -> Result<Self> {
        if base.level() != 1 {
            return Err(Error::WrongLevel("training starts from the base level".into()));
        }
        if labels.num_papers() != base.len() {
            return Err(Error::DimensionMismatch {
                expected: base.len(),
                found: labels.num_papers(),
            });
        }
        if base.len() < 2 {
            return Err(Error::OutOfRange("training needs at least 2 papers".into()));
        }
        let mut hyper: Vec<HyperLevel> = Vec::new();
        let mut below_members: Vec<Vec<usize>> = base.all_members().to_vec();
        let mut below_edges: Vec<(usize, usize)> = base.edges().to_vec();
        for l in 1..labels.num_levels() {
            let gold = labels.level(l);
            let clusters = if l == 1 {
                ClusterSet::new(1, gold.clusters(), true)
            } else {
                let mut groups = vec![Vec::new(); gold.cluster_count()];
                for (node, papers) in below_members.iter().enumerate() {
                    groups[plurality(papers, gold)].push(node);
                }
                groups.retain(|g| !g.is_empty());
                ClusterSet::new(l, groups, false)
            };
            let level = l + 1;
            let skeleton = LevelGraph::new(
                level.max(2),
                (0..below_members.len()).map(|i| i.to_string()).collect(),
                below_edges.clone(),
                Matrix::zeros(below_members.len(), 1),
                below_members.clone(),
            )?;
            let edges = lift_edges(&skeleton, &clusters);
            let members: Vec<Vec<usize>> = clusters
                .clusters()
                .iter()
                .map(|c| {
                    let mut m: Vec<usize> = c.iter().flat_map(|&v| below_members[v].iter().copied()).collect();
                    m.sort_unstable();
                    m.dedup();
                    m
                })
                .collect();
            hyper.push(HyperLevel {
                ids: (0..clusters.len()).map(|i| format!("L{level}-{i}")).collect(),
                clusters,
                edges: edges.clone(),
                members: members.clone(),
            });
            below_members = members;
            below_edges = edges;
        }
        let n = base.len();
        let mut containing = vec![(0..n).map(|p| vec![p]).collect::<Vec<_>>()];
        for h in &hyper {
            let mut c = vec![Vec::new(); n];
            for (node, m) in h.members.iter().enumerate() {
                for &p in m {
                    c[p].push(node);
                }
            }
            containing.push(c);
        }
        Ok(Self {
            base,
            labels,
            hyper,
            containing,
            scope: Scope::Neighbors,
        })
    }

    /// Scores every node pair in the forward pass instead of edges only, so
    /// that supervision may name non-adjacent pairs.
    pub fn with_scope(mut self, scope: Scope) -> Self {
        self.scope = scope;
        self
    }

    pub fn num_levels(&self) -> usize {
        self.hyper.len() + 1
    }

    pub fn base(&self) -> &LevelGraph {
        &self.base
    }

    pub fn labels(&self) -> &GoldHierarchyLabels {
        &self.labels
    }

    /// Gold grouping of level `level` (1-based) into the nodes of the next level.
    pub fn gold_clusters(&self, level: usize) -> &ClusterSet {
        &self.hyper[level - 1].clusters
    }

    /// Supervised pairs per level for a set of base edges. At level `l`, a
    /// base edge supervises every pair of distinct level-`l` nodes holding its
    /// endpoints, with the level-`l` gold co-membership as target.
    pub fn supervision(&self, base_edges: &[(usize, usize)]) -> Result<Vec<Vec<SupervisedPair>>> {
        let n = self.base.len();
        let mut out = Vec::with_capacity(self.num_levels());
        for l in 1..=self.num_levels() {
            let gold = self.labels.level(l);
            let holders = &self.containing[l - 1];
            let mut pairs = Vec::new();
            for &(u, v) in base_edges {
                if u.max(v) >= n {
                    return Err(Error::NodeOutOfRange { index: u.max(v), len: n });
                }
                let target = if gold.same(u, v) { 1.0 } else { 0.0 };
                for &a in &holders[u] {
                    for &b in &holders[v] {
                        if a != b {
                            pairs.push(SupervisedPair {
                                a: a.min(b),
                                b: a.max(b),
                                target,
                            });
                        }
                    }
                }
            }
            out.push(pairs);
        }
        Ok(out)
    }

    pub(crate) fn forward(&self, params: &EncoderParams) -> Result<Forward> {
        let mut traces = Vec::with_capacity(self.num_levels());
        let mut probs = Vec::with_capacity(self.num_levels());
        let mut reps = Vec::new();
        let mut graph = self.base.clone();
        for l in 1..=self.num_levels() {
            let trace = gat::forward(params, &graph)?;
            let h = &trace.output;
            let mut table = PairProbTable::new();
            let pairs = match self.scope {
                Scope::Neighbors => graph.edges().to_vec(),
                Scope::AllPairs => scope_pairs(&graph, Scope::AllPairs),
            };
            for (u, v) in pairs {
                table.insert(u, v, pair_prob(params, l, h, u, v));
            }
            if l < self.num_levels() {
                let d = densities(&graph, h, &table)?;
                let next = &self.hyper[l - 1];
                reps.push(
                    next.clusters
                        .clusters()
                        .iter()
                        .map(|c| representative(c, &d))
                        .collect::<Result<Vec<_>>>()?,
                );
                let x = aggregate(&next.clusters, h, &d)?;
                graph = LevelGraph::new(l + 1, next.ids.clone(), next.edges.clone(), x, next.members.clone())?;
            }
            traces.push(trace);
            probs.push(table);
        }
        Ok(Forward { traces, probs, reps })
    }

    pub(crate) fn loss(&self, fwd: &Forward, sup: &[Vec<SupervisedPair>], config: &ObjectiveConfig) -> Result<LossParts> {
        let mut cluster = 0.0;
        for (table, pairs) in fwd.probs.iter().zip(sup) {
            if pairs.is_empty() {
                continue;
            }
            let mut sum = 0.0;
            for sp in pairs {
                sum += bce(table.require(sp.a, sp.b)?, sp.target).0;
            }
            cluster += sum / pairs.len() as f64;
        }
        let himulcon = if config.alpha == 0.0 {
            0.0
        } else {
            himulcon_loss(&fwd.traces[0].output, &self.labels, &config.contrast)?
        };
        Ok(LossParts {
            cluster,
            himulcon,
            total: cluster + config.alpha * himulcon,
        })
    }

    pub(crate) fn gradient(
        &self,
        params: &EncoderParams,
        fwd: &Forward,
        sup: &[Vec<SupervisedPair>],
        config: &ObjectiveConfig,
    ) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; params.len()];
        let levels = self.num_levels();
        let mut d_h: Option<Matrix> = None;
        for l in (1..=levels).rev() {
            let trace = &fwd.traces[l - 1];
            let h = &trace.output;
            let mut dh = d_h.take().unwrap_or_else(|| Matrix::zeros(h.rows(), h.cols()));
            let pairs = &sup[l - 1];
            if !pairs.is_empty() {
                let inv = 1.0 / pairs.len() as f64;
                let cols = h.cols();
                let (mut da, mut db) = (vec![0.0; cols], vec![0.0; cols]);
                // Repeated pairs share one pass through the scorer.
                let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
                for sp in pairs {
                    let p = fwd.probs[l - 1].require(sp.a, sp.b)?;
                    *merged.entry((sp.a, sp.b)).or_default() += bce(p, sp.target).1 * inv * 0.5;
                }
                for ((a, b), d_prob) in merged {
                    if d_prob == 0.0 {
                        continue;
                    }
                    for (x, y) in [(a, b), (b, a)] {
                        da.iter_mut().for_each(|v| *v = 0.0);
                        db.iter_mut().for_each(|v| *v = 0.0);
                        let t = scorer::forward(params, l, h.row(x), h.row(y));
                        scorer::backward(params, l, &t, d_prob, &mut grad, &mut da, &mut db);
                        dh.row_mut(x).iter_mut().zip(&da).for_each(|(g, d)| *g += d);
                        dh.row_mut(y).iter_mut().zip(&db).for_each(|(g, d)| *g += d);
                    }
                }
            }
            if l == 1 && config.alpha != 0.0 {
                let (_, mut g) = himulcon_with_grad(h, &self.labels, &config.contrast)?;
                g.scale(config.alpha);
                dh.add_assign(&g);
            }
            let dx = gat::backward(params, trace, &dh, &mut grad);
            if l > 1 {
                // Features were mean(members) + representative.
                let below = &fwd.traces[l - 2].output;
                let mut d_below = Matrix::zeros(below.rows(), below.cols());
                let clusters = &self.hyper[l - 2].clusters;
                for (c, members) in clusters.clusters().iter().enumerate() {
                    let g = dx.row(c);
                    let inv = 1.0 / members.len() as f64;
                    for &z in members {
                        d_below.row_mut(z).iter_mut().zip(g).for_each(|(o, v)| *o += v * inv);
                    }
                    let k = fwd.reps[l - 2][c];
                    d_below.row_mut(k).iter_mut().zip(g).for_each(|(o, v)| *o += v);
                }
                d_h = Some(d_below);
            }
        }
        Ok(grad)
    }

    /// Loss on the given supervision and, when asked, its gradient.
    pub fn evaluate(
        &self,
        params: &EncoderParams,
        sup: &[Vec<SupervisedPair>],
        config: &ObjectiveConfig,
        want_grad: bool,
    ) -> Result<(LossParts, Option<Vec<f64>>)> {
        let fwd = self.forward(params)?;
        let parts = self.loss(&fwd, sup, config)?;
        let grad = if want_grad {
            Some(self.gradient(params, &fwd, sup, config)?)
        } else {
            None
        };
        Ok((parts, grad))
    }
}

fn pair_prob(params: &EncoderParams, level: usize, h: &Matrix, u: usize, v: usize) -> f64 {
    let a = scorer::softmax_same(scorer::forward(params, level, h.row(u), h.row(v)).logits);
    let b = scorer::softmax_same(scorer::forward(params, level, h.row(v), h.row(u)).logits);
    (a + b) / 2.0
}
