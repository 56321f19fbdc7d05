//! Multi-head graph attention with a hand-written backward pass.
//!
//! Per layer and head `k`, with `z = x W` and the self-inclusive neighborhood
//! `Ñ(i) = {i} ∪ N(i)`:
//!
//! ```text
//! e_ij = leaky_relu(a_dst_k · z_i + a_src_k · z_j)
//! α_ij = softmax_{j ∈ Ñ(i)} e_ij
//! out_i = Σ_j α_ij z_j  (+ z_i with the residual option)
//! ```
//!
//! Heads are concatenated. ELU is applied between layers, not after the last.
//! Hyper-node features can be centered per column before the first layer.
//!
//! Without the residual term, nodes with identical neighborhoods (every node
//! of a complete hyper-graph) get identical outputs: `α_ij` then depends on
//! `j` alone up to the leaky kink.

use super::params::EncoderParams;
use crate::error::{Error, Result};
use crate::graph::LevelGraph;
use crate::matrix::{dot, mat_vec_acc, outer_acc, vec_mat_acc, Matrix};

/// Flattened self-inclusive neighborhoods; slot `start[i]` is node `i` itself.
#[derive(Clone, Debug)]
pub(crate) struct Neighborhoods {
    start: Vec<usize>,
    nodes: Vec<usize>,
}

impl Neighborhoods {
    pub(crate) fn new(adjacency: &[Vec<usize>]) -> Self {
        let mut start = Vec::with_capacity(adjacency.len() + 1);
        let mut nodes = Vec::new();
        for (i, adj) in adjacency.iter().enumerate() {
            start.push(nodes.len());
            nodes.push(i);
            nodes.extend_from_slice(adj);
        }
        start.push(nodes.len());
        Self { start, nodes }
    }

    fn slots(&self, i: usize) -> std::ops::Range<usize> {
        self.start[i]..self.start[i + 1]
    }

    fn total(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Clone, Debug)]
struct LayerCache {
    input: Matrix,
    z: Matrix,
    pre: Vec<f64>,
    alpha: Vec<f64>,
    out: Matrix,
    apply_elu: bool,
    weight: usize,
    att_src: usize,
    att_dst: usize,
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Clone, Debug)]
pub(crate) struct EncodeTrace {
    hood: Neighborhoods,
    centered: bool,
    layers: Vec<LayerCache>,
    pub output: Matrix,
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

pub(crate) fn forward(params: &EncoderParams, graph: &LevelGraph) -> Result<EncodeTrace> {
    let shape = params.shape();
    let expected = if graph.level() == 1 {
        shape.input_dim
    } else {
        shape.hidden
    };
    if graph.features().cols() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: graph.features().cols(),
        });
    }
    let hood = Neighborhoods::new(graph.adjacency());
    let mut x = graph.features().clone();
    let centered = shape.center_hyper && graph.level() > 1;
    if centered {
        center_columns(&mut x);
    }
    let mut layers = Vec::with_capacity(shape.layers);
    for layer in 0..shape.layers {
        let idx = params.layer_idx(layer);
        let weight = if graph.level() == 1 {
            idx.weight_base
        } else {
            idx.weight_hyper
        };
        let cache = layer_forward(
            params,
            &hood,
            x,
            weight,
            idx.att_src,
            idx.att_dst,
            layer + 1 < shape.layers,
        );
        x = if cache.apply_elu {
            cache.out.map(elu)
        } else {
            cache.out.clone()
        };
        layers.push(cache);
    }
    Ok(EncodeTrace {
        hood,
        centered,
        layers,
        output: x,
    })
}

/// Subtracts each column's mean. The map is a projection, so the same call
/// also carries gradients back through it.
fn center_columns(x: &mut Matrix) {
    let n = x.rows();
    if n == 0 {
        return;
    }
    let mut mean = vec![0.0; x.cols()];
    for row in x.iter_rows() {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    for i in 0..n {
        x.row_mut(i).iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
    }
}

fn layer_forward(
    params: &EncoderParams,
    hood: &Neighborhoods,
    input: Matrix,
    weight: usize,
    att_src: usize,
    att_dst: usize,
    apply_elu: bool,
) -> LayerCache {
    let shape = params.shape();
    let (h, k_heads, d) = (shape.hidden, shape.heads, shape.head_dim());
    let n = input.rows();
    let w = params.tensor(weight);
    let a_src = params.tensor(att_src);
    let a_dst = params.tensor(att_dst);

    let mut z = Matrix::zeros(n, h);
    for i in 0..n {
        vec_mat_acc(input.row(i), w, z.row_mut(i));
    }
    let mut s = vec![0.0; n * k_heads];
    let mut t = vec![0.0; n * k_heads];
    for i in 0..n {
        for k in 0..k_heads {
            let zi = &z.row(i)[k * d..(k + 1) * d];
            s[i * k_heads + k] = dot(&a_src[k * d..(k + 1) * d], zi);
            t[i * k_heads + k] = dot(&a_dst[k * d..(k + 1) * d], zi);
        }
    }

    let slope = shape.negative_slope;
    let mut pre = vec![0.0; hood.total() * k_heads];
    let mut alpha = vec![0.0; hood.total() * k_heads];
    let mut out = Matrix::zeros(n, h);
    for i in 0..n {
        let slots = hood.slots(i);
        for k in 0..k_heads {
            let mut max = f64::NEG_INFINITY;
            for slot in slots.clone() {
                let j = hood.nodes[slot];
                let p = t[i * k_heads + k] + s[j * k_heads + k];
                pre[slot * k_heads + k] = p;
                max = max.max(leaky(p, slope));
            }
            let mut sum = 0.0;
            for slot in slots.clone() {
                let e = (leaky(pre[slot * k_heads + k], slope) - max).exp();
                alpha[slot * k_heads + k] = e;
                sum += e;
            }
            for slot in slots.clone() {
                let a = alpha[slot * k_heads + k] / sum;
                alpha[slot * k_heads + k] = a;
                let j = hood.nodes[slot];
                let zj = &z.row(j)[k * d..(k + 1) * d];
                let oi = &mut out.row_mut(i)[k * d..(k + 1) * d];
                for (o, &v) in oi.iter_mut().zip(zj) {
                    *o += a * v;
                }
            }
        }
        if shape.residual {
            let zi = z.row(i).to_vec();
            out.row_mut(i).iter_mut().zip(&zi).for_each(|(o, v)| *o += v);
        }
    }
    LayerCache {
        input,
        z,
        pre,
        alpha,
        out,
        apply_elu,
        weight,
        att_src,
        att_dst,
    }
}

/// Accumulates parameter gradients into `grad` and returns the gradient with
/// respect to the input features.
pub(crate) fn backward(
    params: &EncoderParams,
    trace: &EncodeTrace,
    d_output: &Matrix,
    grad: &mut [f64],
) -> Matrix {
    let mut upstream = d_output.clone();
    for cache in trace.layers.iter().rev() {
        upstream = layer_backward(params, &trace.hood, cache, upstream, grad);
    }
    if trace.centered {
        center_columns(&mut upstream);
    }
    upstream
}

fn layer_backward(
    params: &EncoderParams,
    hood: &Neighborhoods,
    c: &LayerCache,
    d_y: Matrix,
    grad: &mut [f64],
) -> Matrix {
    let shape = params.shape();
    let (h, k_heads, d) = (shape.hidden, shape.heads, shape.head_dim());
    let slope = shape.negative_slope;
    let n = c.input.rows();
    let w = params.tensor(c.weight);
    let a_src = params.tensor(c.att_src);
    let a_dst = params.tensor(c.att_dst);

    let mut d_out = d_y;
    if c.apply_elu {
        for i in 0..n {
            for (g, &o) in d_out.row_mut(i).iter_mut().zip(c.out.row(i)) {
                *g *= elu_grad(o);
            }
        }
    }

    let mut dz = if shape.residual {
        d_out.clone()
    } else {
        Matrix::zeros(n, h)
    };
    let mut ds = vec![0.0; n * k_heads];
    let mut dt = vec![0.0; n * k_heads];
    let mut d_alpha = Vec::new();
    for i in 0..n {
        let slots = hood.slots(i);
        for k in 0..k_heads {
            let go = d_out.row(i)[k * d..(k + 1) * d].to_vec();
            d_alpha.clear();
            let mut weighted = 0.0;
            for slot in slots.clone() {
                let j = hood.nodes[slot];
                let a = c.alpha[slot * k_heads + k];
                let da = dot(&go, &c.z.row(j)[k * d..(k + 1) * d]);
                d_alpha.push(da);
                weighted += a * da;
                for (g, &v) in dz.row_mut(j)[k * d..(k + 1) * d].iter_mut().zip(&go) {
                    *g += a * v;
                }
            }
            for (pos, slot) in slots.clone().enumerate() {
                let j = hood.nodes[slot];
                let a = c.alpha[slot * k_heads + k];
                let de = a * (d_alpha[pos] - weighted);
                let dp = if c.pre[slot * k_heads + k] > 0.0 {
                    de
                } else {
                    de * slope
                };
                dt[i * k_heads + k] += dp;
                ds[j * k_heads + k] += dp;
            }
        }
    }

    let src_range = params.range(c.att_src);
    let dst_range = params.range(c.att_dst);
    for i in 0..n {
        for k in 0..k_heads {
            let g_s = ds[i * k_heads + k];
            let g_t = dt[i * k_heads + k];
            let zi = c.z.row(i)[k * d..(k + 1) * d].to_vec();
            for m in 0..d {
                grad[src_range.start + k * d + m] += g_s * zi[m];
                grad[dst_range.start + k * d + m] += g_t * zi[m];
            }
            let dzi = &mut dz.row_mut(i)[k * d..(k + 1) * d];
            for m in 0..d {
                dzi[m] += g_s * a_src[k * d + m] + g_t * a_dst[k * d + m];
            }
        }
    }

    let w_range = params.range(c.weight);
    let mut dx = Matrix::zeros(n, c.input.cols());
    for i in 0..n {
        outer_acc(c.input.row(i), dz.row(i), &mut grad[w_range.clone()]);
        mat_vec_acc(w, dz.row(i), dx.row_mut(i));
    }
    dx
}
