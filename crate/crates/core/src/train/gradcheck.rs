use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Coordinate with the largest error.
    pub worst: Option<usize>,
    pub eps: f64,
}

/// Relative errors use `max(|analytic|, |numeric|, REL_FLOOR)` as denominator.
/// Central differences at `eps = 1e-6` carry roundoff near `1e-9` on losses of
/// order one, so coordinates with gradients below the floor are judged by
/// their absolute error instead.
pub const REL_FLOOR: f64 = 1e-3;

/// Compares `f`'s analytic gradient at `theta` with central differences on a
/// seeded sample of coordinates. `f` returns the loss and, when asked, its
/// gradient.
pub fn grad_check<F>(f: F, theta: &[f64], eps: f64, sample_size: usize, seed: u64) -> Result<GradCheckReport>
where
    F: Fn(&[f64], bool) -> Result<(f64, Option<Vec<f64>>)>,
{
    if !(eps > 0.0) {
        return Err(Error::OutOfRange(format!("eps must be positive, got {eps}")));
    }
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
        eps,
    };
    if sample_size == 0 || theta.is_empty() {
        return Ok(report);
    }
    let (loss, grad) = f(theta, true)?;
    if !loss.is_finite() {
        return Err(Error::NonFiniteProbe(usize::MAX));
    }
    let grad = grad.ok_or_else(|| Error::OutOfRange("loss function returned no gradient".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = sample(&mut rng, theta.len(), sample_size.min(theta.len())).into_vec();
    coords.sort_unstable();
    let mut probe = theta.to_vec();
    for i in coords {
        probe[i] = theta[i] + eps;
        let plus = f(&probe, false)?.0;
        probe[i] = theta[i] - eps;
        let minus = f(&probe, false)?.0;
        probe[i] = theta[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFiniteProbe(i));
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(REL_FLOOR);
        report.checked += 1;
        if rel > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = rel.max(report.max_rel_error);
            report.worst = Some(i);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(x: &[f64], _: bool) -> Result<(f64, Option<Vec<f64>>)> {
        let loss = x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v * v).sum();
        let grad = x.iter().enumerate().map(|(i, v)| 2.0 * (i as f64 + 1.0) * v).collect();
        Ok((loss, Some(grad)))
    }

    #[test]
    fn quadratic_is_exact() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let r = grad_check(quadratic, &x, 1e-5, 10, 1).unwrap();
        assert_eq!(r.checked, 10);
        assert!(r.max_rel_error < 1e-8, "{}", r.max_rel_error);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let bad = |x: &[f64], _: bool| -> Result<(f64, Option<Vec<f64>>)> {
            Ok((x[0] * x[0], Some(vec![x[0]])))
        };
        let r = grad_check(bad, &[1.5], 1e-6, 1, 0).unwrap();
        assert!(r.max_rel_error > 0.4);
    }

    #[test]
    fn empty_sample_is_empty_report() {
        let r = grad_check(quadratic, &[1.0, 2.0], 1e-6, 0, 0).unwrap();
        assert_eq!((r.checked, r.worst), (0, None));
    }

    #[test]
    fn non_finite_probe_is_an_error() {
        let f = |x: &[f64], _: bool| -> Result<(f64, Option<Vec<f64>>)> {
            Ok((if x[0] > 1.0 { f64::NAN } else { x[0] }, Some(vec![1.0])))
        };
        assert!(matches!(grad_check(f, &[1.0], 1e-3, 1, 0), Err(Error::NonFiniteProbe(0))));
    }
}
