use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Instance;
use crate::error::{Error, Result};
use crate::rng::RngStream;

use super::{Explainer, MetricConfig, MetricScore};

/// Replaces zero denominators in relative input stability.
pub const STABILITY_EPS: f64 = 1e-6;

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|a| a * a).sum::<f64>().sqrt()
}

fn re_explain(explainer: &dyn Explainer, z: Vec<f64>, seed: u64, d: usize) -> Result<(Instance, Vec<f64>)> {
    let z = Instance::new(z)?;
    let phi = explainer.explain(&z, seed)?;
    if phi.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: phi.len(),
        });
    }
    Ok((z, phi))
}

fn gaussian_neighbour(x: &Instance, std: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidInput(format!("noise_std: {e}")))?;
    Ok(x.iter().map(|v| v + normal.sample(rng)).collect())
}

/// Largest `‖φ(x′) − φ(x)‖₂ / ‖x′ − x‖₂` over `n_metric_samples` Gaussian
/// neighbours `x′ = x + N(0, noise_std²·I)`.
pub fn local_lipschitz_estimate(
    explainer: &dyn Explainer,
    x: &Instance,
    phi: &[f64],
    seed: u64,
    cfg: &MetricConfig,
    rng: &mut RngStream,
) -> Result<MetricScore> {
    let mut best = 0.0f64;
    for _ in 0..cfg.n_metric_samples {
        let z = gaussian_neighbour(x, cfg.noise_std, rng)?;
        let (z, phi2) = re_explain(explainer, z, seed, x.len())?;
        let dx = norm(z.iter().zip(x.iter()).map(|(a, b)| a - b));
        if dx == 0.0 {
            continue;
        }
        let dphi = norm(phi2.iter().zip(phi).map(|(a, b)| a - b));
        best = best.max(dphi / dx);
    }
    Ok(MetricScore::ok(best))
}

/// Largest `‖φ(x′) − φ(x)‖₂` over `n_metric_samples` points drawn uniformly
/// from the ℓ∞ ball of radius `lower_bound` around `x`.
pub fn max_sensitivity(
    explainer: &dyn Explainer,
    x: &Instance,
    phi: &[f64],
    seed: u64,
    cfg: &MetricConfig,
    rng: &mut RngStream,
) -> Result<MetricScore> {
    let r = cfg.lower_bound;
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::InvalidInput(format!("lower_bound must be >= 0, got {r}")));
    }
    let mut best = 0.0f64;
    for _ in 0..cfg.n_metric_samples {
        let z: Vec<f64> = if r > 0.0 {
            x.iter().map(|v| v + rng.random_range(-r..r)).collect()
        } else {
            x.to_vec()
        };
        let (_, phi2) = re_explain(explainer, z, seed, x.len())?;
        best = best.max(norm(phi2.iter().zip(phi).map(|(a, b)| a - b)));
    }
    Ok(MetricScore::ok(best))
}

fn guarded(num: f64, den: f64) -> f64 {
    num / if den == 0.0 { STABILITY_EPS } else { den }
}

/// Relative change of the attribution over relative change of the input.
pub(crate) fn stability_ratio(x: &[f64], z: &[f64], phi: &[f64], phi2: &[f64]) -> f64 {
    let num = norm(phi2.iter().zip(phi).map(|(a, b)| guarded(a - b, *b)));
    let den = norm(z.iter().zip(x).map(|(a, b)| guarded(a - b, *b)));
    num / den.max(STABILITY_EPS)
}

/// Largest relative input stability ratio over `n_metric_samples` Gaussian
/// neighbours (`noise_std`). Flagged when `phi` is identically zero.
pub fn relative_input_stability(
    explainer: &dyn Explainer,
    x: &Instance,
    phi: &[f64],
    seed: u64,
    cfg: &MetricConfig,
    rng: &mut RngStream,
) -> Result<MetricScore> {
    if phi.iter().all(|v| *v == 0.0) {
        return Ok(MetricScore::flagged(f64::NAN));
    }
    let mut best = 0.0f64;
    for _ in 0..cfg.n_metric_samples {
        let z = gaussian_neighbour(x, cfg.noise_std, rng)?;
        let (z, phi2) = re_explain(explainer, z, seed, x.len())?;
        best = best.max(stability_ratio(x, &z, phi, &phi2));
    }
    Ok(MetricScore::ok(best))
}
