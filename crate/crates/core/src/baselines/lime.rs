use serde::{Deserialize, Serialize};

use crate::attribution::Attribution;
use crate::coalition::Coalition;
use crate::data::Instance;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::perturb::{sample_perturbed, PerturbationSpec};
use crate::rng::{derive_seed, label, rng_stream};

pub const DEFAULT_LIME_SAMPLES: usize = 1000;
const MAX_SWEEPS: usize = 10_000;
const TOLERANCE: f64 = 1e-8;

/// LIME surrogate settings.
///
/// `kernel_width` is in standardized units; `None` means `0.75·√d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub sparsity: f64,
    #[serde(default)]
    pub kernel_width: Option<f64>,
    pub n_samples: usize,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            sparsity: 0.0,
            kernel_width: None,
            n_samples: DEFAULT_LIME_SAMPLES,
        }
    }
}

impl LimeConfig {
    pub fn with_sparsity(mut self, sparsity: f64) -> Self {
        self.sparsity = sparsity;
        self
    }

    pub fn width(&self, d: usize) -> f64 {
        self.kernel_width.unwrap_or(0.75 * (d as f64).sqrt())
    }

    fn validate(&self, d: usize) -> Result<()> {
        if !(self.sparsity.is_finite() && self.sparsity >= 0.0) {
            return Err(Error::InvalidInput(format!("sparsity must be >= 0, got {}", self.sparsity)));
        }
        let w = self.width(d);
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidInput(format!("kernel_width must be > 0, got {w}")));
        }
        if self.n_samples < d + 2 {
            return Err(Error::InvalidInput(format!(
                "n_samples must be >= d + 2 = {}, got {}",
                d + 2,
                self.n_samples
            )));
        }
        Ok(())
    }
}

/// A weighted lasso fit `y ≈ b + U·γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub sweeps: usize,
    /// Objective after each sweep.
    pub objective: Vec<f64>,
}

/// Minimizes `½ Σ_r w_r (y_r − b − u_r·γ)² + λ‖γ‖₁` by cyclic coordinate
/// descent with the intercept unpenalized. `u` is row-major `n × p`.
pub fn weighted_lasso(u: &[f64], p: usize, y: &[f64], w: &[f64], lambda: f64) -> Result<LassoFit> {
    let n = y.len();
    assert_eq!(u.len(), n * p);
    let wsum: f64 = w.iter().sum();
    if wsum.is_nan() || wsum <= 0.0 {
        return Err(Error::Degenerate("all proximity weights are zero; increase kernel_width".into()));
    }
    let wmean = |col: &dyn Fn(usize) -> f64| (0..n).map(|r| w[r] * col(r)).sum::<f64>() / wsum;
    let u_mean: Vec<f64> = (0..p).map(|j| wmean(&|r| u[r * p + j])).collect();
    let y_mean = wmean(&|r| y[r]);
    // centred copies; the intercept drops out of the coordinate updates
    let uc: Vec<f64> = (0..n * p).map(|k| u[k] - u_mean[k % p]).collect();
    let mut resid: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let a: Vec<f64> = (0..p).map(|j| (0..n).map(|r| w[r] * uc[r * p + j].powi(2)).sum()).collect();

    let objective = |resid: &[f64], coef: &[f64]| {
        0.5 * resid.iter().zip(w).map(|(e, wr)| wr * e * e).sum::<f64>()
            + lambda * coef.iter().map(|c| c.abs()).sum::<f64>()
    };
    let mut coef = vec![0.0; p];
    let mut history = Vec::new();
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..p {
            if a[j] <= 0.0 {
                continue;
            }
            let old = coef[j];
            let rho: f64 = (0..n).map(|r| w[r] * uc[r * p + j] * (resid[r] + uc[r * p + j] * old)).sum();
            let new = soft_threshold(rho, lambda) / a[j];
            if new != old {
                for r in 0..n {
                    resid[r] -= uc[r * p + j] * (new - old);
                }
                coef[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        history.push(objective(&resid, &coef));
        if max_change < TOLERANCE {
            break;
        }
    }
    let intercept = y_mean - coef.iter().zip(&u_mean).map(|(c, m)| c * m).sum::<f64>();
    Ok(LassoFit {
        coef,
        intercept,
        sweeps,
        objective: history,
    })
}

fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// LIME with a Gaussian neighbourhood: samples around `x` from `spec`,
/// weights them by `exp(−‖u‖²/width²)` with `u = (z − x)/σ̂`, and fits a
/// weighted lasso on `u`. `phi` is reported per feature unit (`γᵢ/σ̂ᵢ`);
/// `base_variance` holds the surrogate's value at `x`.
pub fn lime<M: Model + ?Sized>(
    model: &M,
    x: &Instance,
    spec: &PerturbationSpec,
    cfg: &LimeConfig,
    master_seed: u64,
) -> Result<Attribution> {
    let d = x.len();
    if model.arity() != d {
        return Err(Error::DimensionMismatch {
            expected: model.arity(),
            got: d,
        });
    }
    cfg.validate(d)?;
    let mut rng = rng_stream(derive_seed(master_seed, label("lime/samples")), 0);
    let z = sample_perturbed(x, &Coalition::empty(d), spec, cfg.n_samples, &mut rng)?;
    let sd = spec.feature_std();
    let width = cfg.width(d);

    let mut u = Vec::with_capacity(cfg.n_samples * d);
    let mut y = Vec::with_capacity(cfg.n_samples);
    let mut w = Vec::with_capacity(cfg.n_samples);
    for (r, row) in z.iter_rows().enumerate() {
        let mut dist2 = 0.0;
        for i in 0..d {
            let ui = if sd[i] > 0.0 { (row[i] - x[i]) / sd[i] } else { 0.0 };
            dist2 += ui * ui;
            u.push(ui);
        }
        w.push((-dist2 / (width * width)).exp());
        let out = model.predict(row).map_err(|e| Error::ModelEval {
            row: r,
            message: e.to_string(),
        })?;
        if !out.is_finite() {
            return Err(Error::ModelEval {
                row: r,
                message: format!("non-finite output {out}"),
            });
        }
        y.push(out);
    }
    let fit = weighted_lasso(&u, d, &y, &w, cfg.sparsity)?;
    let phi = fit
        .coef
        .iter()
        .zip(sd)
        .map(|(g, s)| if *s > 0.0 { g / s } else { 0.0 })
        .collect();
    Ok(Attribution::new("lime", phi, master_seed, fit.intercept)
        .with_param("sparsity", cfg.sparsity)
        .with_param("kernel_width", width)
        .with_param("samples", cfg.n_samples)
        .with_param("sigma", spec.sigma()))
}
