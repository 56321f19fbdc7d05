use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::checkpoint::{Checkpoint, TensorEntry};
use crate::error::{Error, Result};
use crate::matrix::vec_mat_acc;

/// Two-layer map from cluster embeddings to the text-embedding space:
/// `relu(x W1 + b1) W2 + b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub output_dim: usize,
    /// `input_dim × hidden`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `hidden × output_dim`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl ProjectorParams {
    pub fn zeros(input_dim: usize, hidden: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden,
            output_dim,
            w1: vec![0.0; input_dim * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * output_dim],
            b2: vec![0.0; output_dim],
        }
    }

    pub fn init(input_dim: usize, hidden: usize, output_dim: usize, seed: u64) -> Self {
        let mut p = Self::zeros(input_dim, hidden, output_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |w: &mut [f64], fan_in: usize| {
            for v in w {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = z / (fan_in as f64).sqrt();
            }
        };
        fill(&mut p.w1, input_dim);
        fill(&mut p.w2, hidden);
        p
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.input_dim > 0
            && self.hidden > 0
            && self.output_dim > 0
            && self.w1.len() == self.input_dim * self.hidden
            && self.b1.len() == self.hidden
            && self.w2.len() == self.hidden * self.output_dim
            && self.b2.len() == self.output_dim;
        if !ok {
            return Err(Error::Checkpoint("projector tensors do not match its sizes".into()));
        }
        if [&self.w1, &self.b1, &self.w2, &self.b2].iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("projector".into()));
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let t = |name: &str, dims: Vec<usize>| TensorEntry {
            name: name.into(),
            dims,
        };
        let mut data = Vec::new();
        for part in [&self.w1, &self.b1, &self.w2, &self.b2] {
            data.extend_from_slice(part);
        }
        Checkpoint {
            meta: vec![
                ("input_dim".into(), self.input_dim as f64),
                ("hidden".into(), self.hidden as f64),
                ("output_dim".into(), self.output_dim as f64),
            ],
            tensors: vec![
                t("projector.w1", vec![self.input_dim, self.hidden]),
                t("projector.b1", vec![self.hidden]),
                t("projector.w2", vec![self.hidden, self.output_dim]),
                t("projector.b2", vec![self.output_dim]),
            ],
            data,
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        let dim = |k: &str| -> Result<usize> {
            ck.meta(k)
                .ok()
                .filter(|v| *v >= 1.0 && v.fract() == 0.0)
                .map(|v| v as usize)
                .ok_or_else(|| Error::Checkpoint(format!("missing or bad `{k}`")))
        };
        let mut p = Self::zeros(dim("input_dim")?, dim("hidden")?, dim("output_dim")?);
        let expected = p.w1.len() + p.b1.len() + p.w2.len() + p.b2.len();
        if ck.data.len() != expected {
            return Err(Error::Checkpoint(format!(
                "projector expects {expected} values, found {}",
                ck.data.len()
            )));
        }
        let mut rest = ck.data.as_slice();
        for part in [&mut p.w1, &mut p.b1, &mut p.w2, &mut p.b2] {
            let (head, tail) = rest.split_at(part.len());
            part.copy_from_slice(head);
            rest = tail;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }
}

pub fn project_cluster(x: &[f64], p: &ProjectorParams) -> Result<Vec<f64>> {
    if x.len() != p.input_dim {
        return Err(Error::DimensionMismatch {
            expected: p.input_dim,
            found: x.len(),
        });
    }
    let mut hidden = p.b1.clone();
    vec_mat_acc(x, &p.w1, &mut hidden);
    hidden.iter_mut().for_each(|v| *v = v.max(0.0));
    let mut out = p.b2.clone();
    vec_mat_acc(&hidden, &p.w2, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero() {
        let p = ProjectorParams::zeros(3, 4, 2);
        assert_eq!(project_cluster(&[1.0, -2.0, 3.0], &p).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_weights_pass_non_negative_input() {
        let mut p = ProjectorParams::zeros(3, 3, 3);
        for i in 0..3 {
            p.w1[i * 3 + i] = 1.0;
            p.w2[i * 3 + i] = 1.0;
        }
        assert_eq!(project_cluster(&[0.5, 2.0, 0.0], &p).unwrap(), vec![0.5, 2.0, 0.0]);
    }

    #[test]
    fn matches_dense_oracle() {
        let p = ProjectorParams::init(5, 7, 3, 11);
        let mut p = p;
        p.b1.iter_mut().enumerate().for_each(|(i, b)| *b = 0.1 * i as f64 - 0.3);
        p.b2 = vec![0.2, -0.1, 0.05];
        let x = [0.3, -1.2, 0.8, 2.0, -0.4];
        let mut h = [0.0; 7];
        for j in 0..7 {
            let mut s = p.b1[j];
            for i in 0..5 {
                s += x[i] * p.w1[i * 7 + j];
            }
            h[j] = if s > 0.0 { s } else { 0.0 };
        }
        let got = project_cluster(&x, &p).unwrap();
        for k in 0..3 {
            let mut s = p.b2[k];
            for j in 0..7 {
                s += h[j] * p.w2[j * 3 + k];
            }
            assert!((got[k] - s).abs() < 1e-12);
        }
        assert!(matches!(project_cluster(&[1.0], &p), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = ProjectorParams::init(4, 6, 2, 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("proj.bin");
        p.save(&path).unwrap();
        assert_eq!(ProjectorParams::load(&path).unwrap(), p);
    }
}
