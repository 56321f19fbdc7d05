//! Losses, gradient checking and the clustering pre-training loop.

mod adam;
mod gradcheck;
mod losses;
mod objective;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderParams, EncoderShape, Scope};
use crate::error::{Error, Result};
use crate::graph::{init_level_graph, CitationGraph, EmbeddingMatrix, LevelGraph};
use crate::labels::GoldHierarchyLabels;

pub use adam::Adam;
pub use gradcheck::{grad_check, GradCheckReport, REL_FLOOR};
pub use losses::{
    base_pairs, bce, cluster_loss, generation_loss, hicluster_loss, himulcon_loss, himulcon_with_grad,
    joint_objective, ContrastConfig, JointObjective, SupervisedPair, EPS,
};
pub use objective::{LossParts, ObjectiveConfig, TrainingProblem};

/// Encoder sizes other than the input width, which comes from the embeddings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSettings {
    pub hidden: usize,
    pub heads: usize,
    pub layers: usize,
    pub scorer_hidden: usize,
    pub scorers: usize,
    pub negative_slope: f64,
    pub residual: bool,
    pub center_hyper: bool,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        let s = EncoderShape::new(1);
        Self {
            hidden: s.hidden,
            heads: s.heads,
            layers: s.layers,
            scorer_hidden: s.scorer_hidden,
            scorers: s.scorers,
            negative_slope: s.negative_slope,
            residual: s.residual,
            center_hyper: s.center_hyper,
        }
    }
}

impl EncoderSettings {
    pub fn shape(&self, input_dim: usize) -> EncoderShape {
        EncoderShape {
            input_dim,
            hidden: self.hidden,
            heads: self.heads,
            layers: self.layers,
            scorer_hidden: self.scorer_hidden,
            scorers: self.scorers,
            negative_slope: self.negative_slope,
            residual: self.residual,
            center_hyper: self.center_hyper,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the contrastive term.
    pub alpha: f64,
    pub tau: f64,
    /// Per-level contrastive weights; missing levels weigh 1.
    pub delta: Vec<f64>,
    /// Weight of the clustering loss in the joint objective.
    pub lambda: f64,
    pub p_tau: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Share of base edges held out for early stopping.
    pub validation_fraction: f64,
    /// Supervised pairs: citation edges, or every pair of papers.
    pub scope: Scope,
    pub encoder: EncoderSettings,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            tau: 0.1,
            delta: Vec::new(),
            lambda: 1.0,
            p_tau: 0.5,
            learning_rate: 1e-3,
            epochs: 500,
            seed: 0,
            patience: 10,
            validation_fraction: 0.2,
            scope: Scope::Neighbors,
            encoder: EncoderSettings::default(),
        }
    }
}

impl TrainConfig {
    pub fn objective(&self) -> ObjectiveConfig {
        ObjectiveConfig {
            alpha: self.alpha,
            contrast: ContrastConfig {
                tau: self.tau,
                delta: self.delta.clone(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha >= 0.0) || !(self.lambda >= 0.0) {
            return bad("alpha and lambda must be non-negative".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("bad learning rate {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)".into());
        }
        self.objective().contrast.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: LossParts,
    pub validation: Option<LossParts>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub train_pairs: usize,
    pub validation_pairs: usize,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned; `None` when no epoch ran.
    pub best_epoch: Option<usize>,
    pub best_loss: Option<f64>,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

/// Seeded shuffle of the edges into `(train, validation)`.
pub fn split_edges(edges: &[(usize, usize)], fraction: f64, seed: u64) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let mut shuffled = edges.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = ((edges.len() as f64) * fraction).round() as usize;
    let k = k.min(edges.len().saturating_sub(1));
    let mut val = shuffled.split_off(shuffled.len() - k);
    shuffled.sort_unstable();
    val.sort_unstable();
    (shuffled, val)
}

pub fn train_clustering(
    graph: &CitationGraph,
    x: &EmbeddingMatrix,
    labels: &GoldHierarchyLabels,
    config: &TrainConfig,
) -> Result<(EncoderParams, TrainReport)> {
    train_level_graph(init_level_graph(graph, x)?, labels, config)
}

/// The `(train, validation)` pairs `train_level_graph` uses under `config`.
pub fn training_pairs(base: &LevelGraph, config: &TrainConfig) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let pairs = match config.scope {
        Scope::Neighbors => base.edges().to_vec(),
        Scope::AllPairs => (0..base.len()).flat_map(|u| (u + 1..base.len()).map(move |v| (u, v))).collect(),
    };
    split_edges(&pairs, config.validation_fraction, config.seed ^ 0x5eed)
}

/// Full-batch training from the base level graph. Returns the parameters
/// with the lowest validation loss (training loss when nothing is held out).
pub fn train_level_graph(
    base: LevelGraph,
    labels: &GoldHierarchyLabels,
    config: &TrainConfig,
) -> Result<(EncoderParams, TrainReport)> {
    config.validate()?;
    let shape = config.encoder.shape(base.features().cols());
    let mut params = EncoderParams::init(shape, config.seed)?;
    let (train_edges, val_edges) = training_pairs(&base, config);
    let problem = TrainingProblem::new(base, labels.clone())?.with_scope(config.scope);
    let train_sup = problem.supervision(&train_edges)?;
    let val_sup = problem.supervision(&val_edges)?;
    let objective = config.objective();
    let mut opt = Adam::new(params.len(), config.learning_rate);
    let mut report = TrainReport {
        seed: config.seed,
        train_pairs: train_edges.len(),
        validation_pairs: val_edges.len(),
        epochs: Vec::new(),
        best_epoch: None,
        best_loss: None,
        stopped_early: false,
    };
    let mut best = params.clone();
    let mut since_best = 0;
    for epoch in 0..config.epochs {
        let fwd = problem.forward(&params)?;
        let train = problem.loss(&fwd, &train_sup, &objective)?;
        if !train.total.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: train.total,
            });
        }
        let validation = if val_edges.is_empty() {
            None
        } else {
            Some(problem.loss(&fwd, &val_sup, &objective)?)
        };
        let watched = validation.map_or(train.total, |v| v.total);
        log::debug!("epoch {epoch}: train {:.6} watched {:.6}", train.total, watched);
        report.epochs.push(EpochRecord {
            epoch,
            train,
            validation,
        });
        if report.best_loss.is_none_or(|b| watched < b) {
            report.best_loss = Some(watched);
            report.best_epoch = Some(epoch);
            best = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                report.stopped_early = true;
                break;
            }
        }
        let grad = problem.gradient(&params, &fwd, &train_sup, &objective)?;
        opt.step(params.as_mut_slice(), &grad);
        if !params.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: f64::NAN,
            });
        }
    }
    Ok((best, report))
}

#[cfg(test)]
mod tests;
