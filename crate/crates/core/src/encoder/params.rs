use std::ops::Range;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, TensorEntry};
use crate::error::{Error, Result};

/// Sizes of the graph encoder and pair scorer.
///
/// The first attention layer has two input weights: one for level-1 paper
/// features (`input_dim`) and one for aggregated hyper-node features, which
/// live in the encoder's output space (`hidden`). Attention vectors and all
/// later layers are shared across levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderShape {
    pub input_dim: usize,
    pub hidden: usize,
    pub heads: usize,
    pub layers: usize,
    pub scorer_hidden: usize,
    /// Number of scorer weight sets; level `l` uses set `min(l, scorers) - 1`.
    pub scorers: usize,
    pub negative_slope: f64,
    /// Add each node's own transformed features to its attention output.
    pub residual: bool,
    /// Subtract the per-column mean from hyper-node features before the
    /// first layer.
    pub center_hyper: bool,
}

impl EncoderShape {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: 64,
            heads: 4,
            layers: 2,
            scorer_hidden: 64,
            scorers: 1,
            negative_slope: 0.2,
            residual: true,
            center_hyper: true,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.input_dim == 0 || self.hidden == 0 || self.scorer_hidden == 0 {
            return bad("encoder dimensions must be positive");
        }
        if self.heads == 0 || self.hidden % self.heads != 0 {
            return bad("hidden width must be a positive multiple of the head count");
        }
        if self.layers == 0 || self.scorers == 0 {
            return bad("need at least one layer and one scorer");
        }
        if !self.negative_slope.is_finite() {
            return bad("negative slope must be finite");
        }
        Ok(())
    }

    fn layout(&self) -> Vec<TensorEntry> {
        let (h, k, d, s) = (self.hidden, self.heads, self.head_dim(), self.scorer_hidden);
        let t = |name: String, dims: Vec<usize>| TensorEntry { name, dims };
        let mut v = vec![
            t("gat.stem.base".into(), vec![self.input_dim, h]),
            t("gat.stem.hyper".into(), vec![h, h]),
        ];
        for l in 0..self.layers {
            if l > 0 {
                v.push(t(format!("gat.{l}.weight"), vec![h, h]));
            }
            v.push(t(format!("gat.{l}.att_src"), vec![k, d]));
            v.push(t(format!("gat.{l}.att_dst"), vec![k, d]));
        }
        for i in 0..self.scorers {
            v.push(t(format!("scorer.{i}.w1"), vec![2 * h, s]));
            v.push(t(format!("scorer.{i}.b1"), vec![s]));
            v.push(t(format!("scorer.{i}.w2"), vec![s, s]));
            v.push(t(format!("scorer.{i}.b2"), vec![s]));
            v.push(t(format!("scorer.{i}.w3"), vec![s, 2]));
            v.push(t(format!("scorer.{i}.b3"), vec![2]));
        }
        v
    }
}

/// Tensor indices into the layout for one attention layer.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LayerIdx {
    pub weight_base: usize,
    pub weight_hyper: usize,
    pub att_src: usize,
    pub att_dst: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ScorerIdx {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub w3: usize,
    pub b3: usize,
}

/// All encoder and scorer weights in one flat vector.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    shape: EncoderShape,
    tensors: Vec<TensorEntry>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl EncoderParams {
    /// Gaussian initialization scaled by `1/sqrt(fan_in)`; biases start at zero.
    pub fn init(shape: EncoderShape, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (t, entry) in p.tensors.clone().iter().enumerate() {
            if entry.dims.len() == 1 {
                continue;
            }
            let scale = 1.0 / (entry.dims[entry.dims.len() - 2] as f64).sqrt();
            let scale = if entry.name.contains("att_") {
                1.0 / (entry.dims[1] as f64).sqrt()
            } else {
                scale
            };
            for v in p.tensor_mut(t) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = z * scale;
            }
        }
        Ok(p)
    }

    pub fn zeros(shape: EncoderShape) -> Result<Self> {
        shape.validate()?;
        let tensors = shape.layout();
        let mut offsets = Vec::with_capacity(tensors.len() + 1);
        let mut total = 0;
        for t in &tensors {
            offsets.push(total);
            total += t.numel();
        }
        offsets.push(total);
        Ok(Self {
            shape,
            tensors,
            offsets,
            data: vec![0.0; total],
        })
    }

    pub fn shape(&self) -> &EncoderShape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn tensors(&self) -> &[TensorEntry] {
        &self.tensors
    }

    pub fn tensor_index(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|t| t.name == name)
    }

    pub(crate) fn range(&self, t: usize) -> Range<usize> {
        self.offsets[t]..self.offsets[t + 1]
    }

    pub fn tensor(&self, t: usize) -> &[f64] {
        &self.data[self.range(t)]
    }

    pub fn tensor_mut(&mut self, t: usize) -> &mut [f64] {
        let r = self.range(t);
        &mut self.data[r]
    }

    pub fn named(&self, name: &str) -> Option<&[f64]> {
        self.tensor_index(name).map(|t| self.tensor(t))
    }

    pub fn named_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        self.tensor_index(name).map(|t| self.tensor_mut(t))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn layer_idx(&self, layer: usize) -> LayerIdx {
        // [stem.base, stem.hyper, 0.att_src, 0.att_dst, 1.weight, 1.att_src, 1.att_dst, ...]
        if layer == 0 {
            LayerIdx {
                weight_base: 0,
                weight_hyper: 1,
                att_src: 2,
                att_dst: 3,
            }
        } else {
            let w = 4 + 3 * (layer - 1);
            LayerIdx {
                weight_base: w,
                weight_hyper: w,
                att_src: w + 1,
                att_dst: w + 2,
            }
        }
    }

    pub(crate) fn scorer_idx(&self, level: usize) -> ScorerIdx {
        let s = level.clamp(1, self.shape.scorers) - 1;
        let base = 4 + 3 * (self.shape.layers - 1) + 6 * s;
        ScorerIdx {
            w1: base,
            b1: base + 1,
            w2: base + 2,
            b2: base + 3,
            w3: base + 4,
            b3: base + 5,
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let s = &self.shape;
        Checkpoint {
            meta: vec![
                ("input_dim".into(), s.input_dim as f64),
                ("hidden".into(), s.hidden as f64),
                ("heads".into(), s.heads as f64),
                ("layers".into(), s.layers as f64),
                ("scorer_hidden".into(), s.scorer_hidden as f64),
                ("scorers".into(), s.scorers as f64),
                ("negative_slope".into(), s.negative_slope),
                ("residual".into(), if s.residual { 1.0 } else { 0.0 }),
                ("center_hyper".into(), if s.center_hyper { 1.0 } else { 0.0 }),
            ],
            tensors: self.tensors.clone(),
            data: self.data.clone(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        let int = |k: &str| ck.meta(k).map(|v| v as usize);
        let shape = EncoderShape {
            input_dim: int("input_dim")?,
            hidden: int("hidden")?,
            heads: int("heads")?,
            layers: int("layers")?,
            scorer_hidden: int("scorer_hidden")?,
            scorers: int("scorers")?,
            negative_slope: ck.meta("negative_slope")?,
            residual: ck.meta("residual")? != 0.0,
            center_hyper: ck.meta("center_hyper")? != 0.0,
        };
        let mut p = Self::zeros(shape)?;
        if p.tensors != ck.tensors {
            return Err(Error::Checkpoint("tensor table does not match the encoder layout".into()));
        }
        if ck.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        p.data = ck.data;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }
}
