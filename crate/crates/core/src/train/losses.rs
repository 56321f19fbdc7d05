//! Pair classification and hierarchical contrastive losses.

use serde::{Deserialize, Serialize};

use crate::encoder::{NodeEmbeddings, PairProbTable};
use crate::error::{Error, Result};
use crate::labels::GoldHierarchyLabels;
use crate::matrix::{cosine, cosine_backward, Matrix};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-12;

/// One supervised pair of level nodes with its 0/1 target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupervisedPair {
    pub a: usize,
    pub b: usize,
    pub target: f64,
}

/// Binary cross-entropy and its derivative in `p` (zero where clamped).
pub fn bce(p: f64, q: f64) -> (f64, f64) {
    let c = p.clamp(EPS, 1.0 - EPS);
    let loss = -(q * c.ln() + (1.0 - q) * (1.0 - c).ln());
    let grad = if p > EPS && p < 1.0 - EPS {
        -q / c + (1.0 - q) / (1.0 - c)
    } else {
        0.0
    };
    (loss, grad)
}

/// Per-level mean cross-entropy over the supervised pairs, summed over
/// levels. Levels without pairs contribute nothing.
pub fn cluster_loss(probs: &[PairProbTable], pairs: &[Vec<SupervisedPair>]) -> Result<f64> {
    if probs.len() < pairs.iter().rposition(|p| !p.is_empty()).map_or(0, |i| i + 1) {
        return Err(Error::DimensionMismatch {
            expected: pairs.len(),
            found: probs.len(),
        });
    }
    let mut total = 0.0;
    for (table, level) in probs.iter().zip(pairs) {
        if level.is_empty() {
            continue;
        }
        let mut sum = 0.0;
        for sp in level {
            sum += bce(table.require(sp.a, sp.b)?, sp.target).0;
        }
        total += sum / level.len() as f64;
    }
    Ok(total)
}

/// Supervision on the base level: each edge with target 1 when its papers
/// share a finest-level gold cluster.
pub fn base_pairs(edges: &[(usize, usize)], labels: &GoldHierarchyLabels) -> Result<Vec<SupervisedPair>> {
    let gold = labels.level(1);
    edges
        .iter()
        .map(|&(a, b)| {
            if a.max(b) >= gold.len() {
                return Err(Error::Labels(format!("edge ({a}, {b}) has an unlabeled paper")));
            }
            Ok(SupervisedPair {
                a,
                b,
                target: if gold.same(a, b) { 1.0 } else { 0.0 },
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContrastConfig {
    /// Softmax temperature.
    pub tau: f64,
    /// Per-level weights; missing levels weigh 1.
    pub delta: Vec<f64>,
}

impl Default for ContrastConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            delta: Vec::new(),
        }
    }
}

impl ContrastConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if self.delta.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::Config("level weights must be non-negative".into()));
        }
        Ok(())
    }

    pub fn delta(&self, level: usize) -> f64 {
        self.delta.get(level - 1).copied().unwrap_or(1.0)
    }
}

pub fn himulcon_loss(h: &NodeEmbeddings, labels: &GoldHierarchyLabels, config: &ContrastConfig) -> Result<f64> {
    himulcon(h, labels, config, false).map(|(l, _)| l)
}

/// The contrastive loss and its gradient with respect to `h`.
pub fn himulcon_with_grad(
    h: &NodeEmbeddings,
    labels: &GoldHierarchyLabels,
    config: &ContrastConfig,
) -> Result<(f64, Matrix)> {
    himulcon(h, labels, config, true).map(|(l, g)| (l, g.expect("requested")))
}

fn himulcon(
    h: &NodeEmbeddings,
    labels: &GoldHierarchyLabels,
    config: &ContrastConfig,
    want_grad: bool,
) -> Result<(f64, Option<Matrix>)> {
    config.validate()?;
    let n = h.rows();
    if n < 2 {
        return Err(Error::OutOfRange(format!("contrastive loss needs 2 nodes, got {n}")));
    }
    if labels.num_papers() != n {
        return Err(Error::DimensionMismatch {
            expected: labels.num_papers(),
            found: n,
        });
    }
    let levels = labels.num_levels();
    let mut sim = vec![0.0; n * n];
    for u in 0..n {
        for v in u + 1..n {
            let s = cosine(h.row(u), h.row(v)) / config.tau;
            sim[u * n + v] = s;
            sim[v * n + u] = s;
        }
    }
    // Per anchor: log-sum-exp over all others and the softmax weights.
    let mut lse = vec![0.0; n];
    for u in 0..n {
        let m = (0..n).filter(|&v| v != u).map(|v| sim[u * n + v]).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = (0..n).filter(|&v| v != u).map(|v| (sim[u * n + v] - m).exp()).sum();
        lse[u] = m + z.ln();
    }
    // d_sim[u*n+v] = ∂loss/∂sim(u, v) with u as anchor.
    let mut d_sim = if want_grad { vec![0.0; n * n] } else { Vec::new() };
    let mut loss = 0.0;
    for l in 1..=levels {
        let weight = config.delta(l) / levels as f64;
        if weight == 0.0 {
            continue;
        }
        let gold = labels.level(l);
        for u in 0..n {
            let positives: Vec<usize> = (0..n).filter(|&k| k != u && gold.same(u, k)).collect();
            if positives.is_empty() {
                continue;
            }
            let scale = weight / positives.len() as f64;
            for &k in &positives {
                loss -= scale * (sim[u * n + k] - lse[u]);
            }
            if want_grad {
                for &k in &positives {
                    d_sim[u * n + k] -= scale;
                }
                for v in (0..n).filter(|&v| v != u) {
                    d_sim[u * n + v] += weight * (sim[u * n + v] - lse[u]).exp();
                }
            }
        }
    }
    if !want_grad {
        return Ok((loss, None));
    }
    let mut grad = Matrix::zeros(n, h.cols());
    let mut ga = vec![0.0; h.cols()];
    let mut gb = vec![0.0; h.cols()];
    for u in 0..n {
        for v in u + 1..n {
            let up = (d_sim[u * n + v] + d_sim[v * n + u]) / config.tau;
            if up == 0.0 {
                continue;
            }
            ga.iter_mut().for_each(|x| *x = 0.0);
            gb.iter_mut().for_each(|x| *x = 0.0);
            cosine_backward(h.row(u), h.row(v), up, &mut ga, &mut gb);
            grad.row_mut(u).iter_mut().zip(&ga).for_each(|(g, d)| *g += d);
            grad.row_mut(v).iter_mut().zip(&gb).for_each(|(g, d)| *g += d);
        }
    }
    Ok((loss, Some(grad)))
}

/// `cluster + alpha * contrastive`.
pub fn hicluster_loss(cluster: f64, contrastive: f64, alpha: f64) -> f64 {
    cluster + alpha * contrastive
}

/// Sum of per-token log-probabilities over every generated label, or `None`
/// when any label lacks token scores.
pub fn generation_loss(token_logprobs: &[Option<Vec<f64>>]) -> Option<f64> {
    token_logprobs
        .iter()
        .map(|t| t.as_ref().map(|v| v.iter().sum::<f64>()))
        .sum()
}

/// The joint objective alongside its clustering part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointObjective {
    /// `None` when the generation term is unavailable.
    pub value: Option<f64>,
    pub hiclust: f64,
}

pub fn joint_objective(generation: Option<f64>, hiclust: f64, lambda: f64) -> JointObjective {
    JointObjective {
        value: generation.map(|g| g + lambda * hiclust),
        hiclust,
    }
}
