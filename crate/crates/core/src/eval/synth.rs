use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CitationGraph, EmbeddingMatrix, PaperNode};
use crate::labels::{GoldHierarchyLabels, LevelLabels};
use crate::matrix::Matrix;

/// A planted nested block model.
///
/// `branching` lists the fan-out from the top down: `[2, 2]` is two
/// super-blocks of two blocks each. Papers in the same level-`l` block (and
/// no finer one) are linked with probability `intra[l - 1]`, or `inter` when
/// `intra` is shorter; papers sharing no block use `inter`.
///
/// Block centroids nest: a top block draws each coordinate from
/// `N(0, spread² / dim)`, so centroid norms are near `spread` at any width,
/// and every level down adds an offset with half the previous standard
/// deviation. A paper's embedding is its block centroid plus `N(0, noise²)`
/// per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub branching: Vec<usize>,
    pub block_size: usize,
    pub intra: Vec<f64>,
    pub inter: f64,
    pub noise: f64,
    pub dim: usize,
    pub spread: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            branching: vec![2, 2],
            block_size: 15,
            intra: vec![0.9],
            inter: 0.05,
            noise: 0.1,
            dim: 64,
            spread: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.branching.is_empty() || self.branching.contains(&0) {
            return bad("every level needs at least one block");
        }
        if self.block_size == 0 || self.dim == 0 {
            return bad("block_size and dim must be positive");
        }
        if self.intra.len() > self.branching.len() {
            return bad("more intra probabilities than levels");
        }
        if !self.intra.iter().chain([&self.inter]).all(|p| (0.0..=1.0).contains(p)) {
            return bad("edge probabilities must lie in [0, 1]");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite() && self.spread >= 0.0 && self.spread.is_finite()) {
            return bad("noise and spread must be finite and non-negative");
        }
        Ok(())
    }

    pub fn num_levels(&self) -> usize {
        self.branching.len()
    }

    pub fn num_papers(&self) -> usize {
        self.branching.iter().product::<usize>() * self.block_size
    }

    /// Block of `paper` at 1-based `level`.
    pub fn block(&self, paper: usize, level: usize) -> usize {
        let leaf = paper / self.block_size;
        let below: usize = self.branching[self.branching.len() + 1 - level..].iter().product();
        leaf / below
    }

    fn edge_prob(&self, u: usize, v: usize) -> f64 {
        (1..=self.num_levels())
            .find(|&l| self.block(u, l) == self.block(v, l))
            .map_or(self.inter, |l| self.intra.get(l - 1).copied().unwrap_or(self.inter))
    }
}

pub struct SynthInstance {
    pub graph: CitationGraph,
    pub embeddings: EmbeddingMatrix,
    pub labels: GoldHierarchyLabels,
}

/// Alphabetic name of a block, so that generated text has no digits.
fn block_word(level: usize, block: usize) -> String {
    const STEMS: [&str; 4] = ["topic", "field", "area", "domain"];
    let mut letters = Vec::new();
    let mut k = block + 1;
    while k > 0 {
        k -= 1;
        letters.push(b'a' + (k % 26) as u8);
        k /= 26;
    }
    letters.reverse();
    let stem = STEMS[(level - 1) % STEMS.len()];
    format!("{stem}{}", String::from_utf8(letters).expect("ascii"))
}

pub fn synth_graph(config: &SynthConfig) -> Result<SynthInstance> {
    config.validate()?;
    let n = config.num_papers();
    let levels = config.num_levels();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut normal = |sd: f64| -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * sd
    };

    // Centroids from the top level down; `centroids[t]` holds depth t.
    let mut centroids: Vec<Matrix> = Vec::with_capacity(levels);
    let mut sd = config.spread / (config.dim as f64).sqrt();
    for (t, &fan) in config.branching.iter().enumerate() {
        let count: usize = config.branching[..=t].iter().product();
        let mut m = Matrix::zeros(count, config.dim);
        for b in 0..count {
            for j in 0..config.dim {
                let base = if t == 0 { 0.0 } else { centroids[t - 1].get(b / fan, j) };
                m.set(b, j, base + normal(sd));
            }
        }
        centroids.push(m);
        sd *= 0.5;
    }
    let leaves = &centroids[levels - 1];
    let mut x = Matrix::zeros(n, config.dim);
    for i in 0..n {
        for j in 0..config.dim {
            x.set(i, j, leaves.get(i / config.block_size, j) + normal(config.noise));
        }
    }

    let width = (n - 1).to_string().len();
    let ids: Vec<String> = (0..n).map(|i| format!("p{i:0width$}")).collect();
    let nodes: Vec<PaperNode> = (0..n)
        .map(|i| {
            let words: Vec<String> = (1..=levels).map(|l| block_word(l, config.block(i, l))).collect();
            PaperNode::new(
                ids[i].clone(),
                format!("{} study", words.join(" ")),
                if levels == 1 {
                    format!("Work on {}.", words[0])
                } else {
                    format!("Work on {} within {}.", words[0], words[1..].join(" and "))
                },
            )
        })
        .collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < config.edge_prob(u, v) {
                edges.push((ids[v].as_str(), ids[u].as_str()));
            }
        }
    }
    let (graph, _) = CitationGraph::new(nodes, edges)?;
    let labels = GoldHierarchyLabels::new(
        (1..=levels)
            .map(|l| LevelLabels::from_partition(&(0..n).map(|i| config.block(i, l)).collect::<Vec<_>>()))
            .collect::<Result<_>>()?,
    )?;
    Ok(SynthInstance {
        graph,
        embeddings: EmbeddingMatrix::new(x)?,
        labels,
    })
}
