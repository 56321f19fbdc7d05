use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hiclust::ClusterSet;
use crate::matrix::Matrix;

pub const KMEANS_MAX_ITERS: usize = 100;
/// Stop once no center moves farther than this.
pub const KMEANS_TOL: f64 = 1e-6;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centers: &Matrix) -> usize {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centers.iter_rows().enumerate() {
        let d = sq_dist(x, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0
}

/// Lloyd's algorithm over the rows of `x`. The first center is a seeded
/// random row; each further one is the row farthest from the centers so far
/// (ties to the smaller row). Ties in assignment go to the smaller center and
/// a center that loses all its rows stays put. Empty clusters are dropped
/// from the result.
pub fn kmeans_baseline(x: &Matrix, k: usize, seed: u64) -> Result<ClusterSet> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(Error::OutOfRange(format!("k = {k} with {n} rows")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = vec![rng.random_range(0..n)];
    let mut dmin: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(picked[0]))).collect();
    while picked.len() < k {
        let mut far = (0, f64::NEG_INFINITY);
        for (i, &d) in dmin.iter().enumerate() {
            if d > far.1 {
                far = (i, d);
            }
        }
        picked.push(far.0);
        for (i, d) in dmin.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(far.0)));
        }
    }
    let mut centers = x.select_rows(&picked);
    let mut assign = vec![0; n];
    for _ in 0..KMEANS_MAX_ITERS {
        for (i, a) in assign.iter_mut().enumerate() {
            *a = nearest(x.row(i), &centers);
        }
        let mut sums = Matrix::zeros(k, x.cols());
        let mut counts = vec![0usize; k];
        for (i, &c) in assign.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums.row_mut(c).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            let mean: Vec<f64> = sums.row(c).iter().map(|s| s * inv).collect();
            shift = shift.max(sq_dist(&mean, centers.row(c)).sqrt());
            centers.row_mut(c).copy_from_slice(&mean);
        }
        if shift <= KMEANS_TOL {
            break;
        }
    }
    for (i, a) in assign.iter_mut().enumerate() {
        *a = nearest(x.row(i), &centers);
    }
    let mut clusters = vec![Vec::new(); k];
    for (i, &c) in assign.iter().enumerate() {
        clusters[c].push(i);
    }
    clusters.retain(|c| !c.is_empty());
    Ok(ClusterSet::new(1, clusters, false))
}
