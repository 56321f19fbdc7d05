//! Pair scorer: `[h_u; h_v] → tanh → tanh → two logits`, softmax component 0 is P(same cluster).

use super::params::EncoderParams;
use crate::matrix::{mat_vec_acc, outer_acc, vec_mat_acc};

#[derive(Clone, Debug)]
pub(crate) struct PairTrace {
    input: Vec<f64>,
    g1: Vec<f64>,
    g2: Vec<f64>,
    pub logits: [f64; 2],
}

pub(crate) fn softmax_same(logits: [f64; 2]) -> f64 {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    e0 / (e0 + e1)
}

pub(crate) fn forward(params: &EncoderParams, level: usize, hu: &[f64], hv: &[f64]) -> PairTrace {
    let idx = params.scorer_idx(level);
    let s = params.shape().scorer_hidden;
    let mut input = Vec::with_capacity(hu.len() + hv.len());
    input.extend_from_slice(hu);
    input.extend_from_slice(hv);

    let mut g1 = params.tensor(idx.b1).to_vec();
    vec_mat_acc(&input, params.tensor(idx.w1), &mut g1);
    g1.iter_mut().for_each(|v| *v = v.tanh());

    let mut g2 = params.tensor(idx.b2).to_vec();
    vec_mat_acc(&g1, params.tensor(idx.w2), &mut g2);
    g2.iter_mut().for_each(|v| *v = v.tanh());

    let mut logits = [0.0; 2];
    logits.copy_from_slice(params.tensor(idx.b3));
    vec_mat_acc(&g2, params.tensor(idx.w3), &mut logits);
    debug_assert_eq!(g2.len(), s);
    PairTrace {
        input,
        g1,
        g2,
        logits,
    }
}

/// Backpropagates `d_prob = ∂L/∂P(same)` through the scorer. Parameter
/// gradients go to `grad`; input gradients are added to `d_hu`, `d_hv`.
pub(crate) fn backward(
    params: &EncoderParams,
    level: usize,
    trace: &PairTrace,
    d_prob: f64,
    grad: &mut [f64],
    d_hu: &mut [f64],
    d_hv: &mut [f64],
) {
    let idx = params.scorer_idx(level);
    let p = softmax_same(trace.logits);
    let dl0 = d_prob * p * (1.0 - p);
    let d_logits = [dl0, -dl0];

    grad[params.range(idx.b3)]
        .iter_mut()
        .zip(d_logits)
        .for_each(|(g, d)| *g += d);
    outer_acc(&trace.g2, &d_logits, &mut grad[params.range(idx.w3)]);
    let mut d_g2 = vec![0.0; trace.g2.len()];
    mat_vec_acc(params.tensor(idx.w3), &d_logits, &mut d_g2);
    let d_a2: Vec<f64> = d_g2
        .iter()
        .zip(&trace.g2)
        .map(|(d, g)| d * (1.0 - g * g))
        .collect();

    grad[params.range(idx.b2)]
        .iter_mut()
        .zip(&d_a2)
        .for_each(|(g, d)| *g += d);
    outer_acc(&trace.g1, &d_a2, &mut grad[params.range(idx.w2)]);
    let mut d_g1 = vec![0.0; trace.g1.len()];
    mat_vec_acc(params.tensor(idx.w2), &d_a2, &mut d_g1);
    let d_a1: Vec<f64> = d_g1
        .iter()
        .zip(&trace.g1)
        .map(|(d, g)| d * (1.0 - g * g))
        .collect();

    grad[params.range(idx.b1)]
        .iter_mut()
        .zip(&d_a1)
        .for_each(|(g, d)| *g += d);
    outer_acc(&trace.input, &d_a1, &mut grad[params.range(idx.w1)]);
    let mut d_in = vec![0.0; trace.input.len()];
    mat_vec_acc(params.tensor(idx.w1), &d_a1, &mut d_in);
    let half = d_hu.len();
    for (g, d) in d_hu.iter_mut().zip(&d_in[..half]) {
        *g += d;
    }
    for (g, d) in d_hv.iter_mut().zip(&d_in[half..]) {
        *g += d;
    }
}
