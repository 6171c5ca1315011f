//! Monte-Carlo estimation of the coalition variance game `Var_Ω(S)`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::coalition::Coalition;
use crate::data::Instance;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::perturb::{standard_normals, PerturbationSpec};
use crate::rng::{derive_seed, label, rng_stream, RngStream};

use super::VarianceGameConfig;

/// Number of contiguous row batches used for standard errors.
pub const SE_BATCHES: usize = 20;

/// A coalition's estimated output variance.
///
/// `batches` holds the variance of each contiguous row batch; any quantity
/// linear in the game (Shapley values, regression fits) is re-evaluated per
/// batch to get a batch-means standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimate {
    pub value: f64,
    pub batches: Vec<f64>,
}

impl VarianceEstimate {
    pub(crate) fn zero(n_batches: usize) -> Self {
        VarianceEstimate {
            value: 0.0,
            batches: vec![0.0; n_batches],
        }
    }
}

pub(crate) fn n_batches(m: usize) -> usize {
    SE_BATCHES.min(m / 2).max(1)
}

/// Running moments of `y − pivot` for one batch.
#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn from_slice(ys: &[f64]) -> Self {
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let m2 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
        Moments { n, mean, m2 }
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
        }
    }

    fn variance(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            self.m2 / (self.n - 1.0)
        }
    }
}

/// Where the Gaussian draws for a coalition come from.
pub(crate) enum NoiseSource<'a> {
    /// One shared `m × d` block of standard normals (common random numbers).
    Shared(&'a [f64]),
    /// A fresh stream; normals are drawn row-major for perturbed columns only.
    Stream(RngStream),
}

/// Estimates `Var_Ω(S)` from `m` perturbed rows.
///
/// Outputs are centred on the first row's output before accumulating, so a
/// model that is constant on the sample yields exactly zero.
pub(crate) fn estimate_variance<M: Model + ?Sized>(
    model: &M,
    x: &Instance,
    fixed: &Coalition,
    sd: &[f64],
    m: usize,
    noise: NoiseSource<'_>,
) -> Result<VarianceEstimate> {
    let d = x.len();
    let k = n_batches(m);
    if fixed.is_full() {
        return Ok(VarianceEstimate::zero(k));
    }
    let is_fixed = fixed.indicator();
    let mut row = x.to_vec();
    let mut noise = noise;
    let mut eval = |r: usize, row: &mut [f64]| -> Result<f64> {
        match &mut noise {
            NoiseSource::Shared(z) => {
                let zr = &z[r * d..(r + 1) * d];
                for i in 0..d {
                    row[i] = if is_fixed[i] { x[i] } else { x[i] + sd[i] * zr[i] };
                }
            }
            NoiseSource::Stream(rng) => {
                for i in 0..d {
                    row[i] = if is_fixed[i] {
                        x[i]
                    } else {
                        let z: f64 = StandardNormal.sample(rng);
                        x[i] + sd[i] * z
                    };
                }
            }
        }
        let y = model.predict(row).map_err(|e| Error::ModelEval {
            row: r,
            message: e.to_string(),
        })?;
        if !y.is_finite() {
            return Err(Error::ModelEval {
                row: r,
                message: format!("non-finite output {y}"),
            });
        }
        Ok(y)
    };

    let mut total = Moments::default();
    let mut batches = Vec::with_capacity(k);
    let mut buf = Vec::with_capacity(m / k + 1);
    let mut pivot = None;
    for b in 0..k {
        let (lo, hi) = (b * m / k, (b + 1) * m / k);
        buf.clear();
        for r in lo..hi {
            let y = eval(r, &mut row)?;
            let p = *pivot.get_or_insert(y);
            buf.push(y - p);
        }
        let mo = Moments::from_slice(&buf);
        batches.push(mo.variance());
        total = total.merge(mo);
    }
    Ok(VarianceEstimate {
        value: total.variance(),
        batches,
    })
}

/// Estimates the variance game on a list of coalitions for one explanation.
pub(crate) struct GameSampler<'a, M: ?Sized> {
    model: &'a M,
    x: &'a Instance,
    sd: Vec<f64>,
    cfg: &'a VarianceGameConfig,
    seed: u64,
    shared: Option<Vec<f64>>,
}

impl<'a, M: Model + ?Sized> GameSampler<'a, M> {
    pub(crate) fn new(
        model: &'a M,
        x: &'a Instance,
        spec: &PerturbationSpec,
        cfg: &'a VarianceGameConfig,
        master_seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let d = x.len();
        spec.check_dim(d)?;
        if model.arity() != d {
            return Err(Error::DimensionMismatch {
                expected: model.arity(),
                got: d,
            });
        }
        let shared = if cfg.paired_sampling {
            let mut rng = rng_stream(derive_seed(master_seed, label("varshap/paired")), 0);
            Some(standard_normals(cfg.samples_per_coalition, d, &mut rng))
        } else {
            None
        };
        Ok(GameSampler {
            model,
            x,
            sd: spec.perturbation_std(),
            cfg,
            seed: derive_seed(master_seed, label("varshap/coalition")),
            shared,
        })
    }

    pub(crate) fn estimate(&self, coalition: &Coalition) -> Result<VarianceEstimate> {
        let noise = match &self.shared {
            Some(z) => NoiseSource::Shared(z),
            None => NoiseSource::Stream(rng_stream(self.seed, coalition.rank())),
        };
        estimate_variance(
            self.model,
            self.x,
            coalition,
            &self.sd,
            self.cfg.samples_per_coalition,
            noise,
        )
    }

    /// Estimates every coalition; order of results matches the input.
    pub(crate) fn estimate_all(&self, coalitions: &[Coalition]) -> Result<Vec<VarianceEstimate>> {
        if self.cfg.sequential || !self.model.is_reentrant() {
            coalitions.iter().map(|c| self.estimate(c)).collect()
        } else {
            coalitions.par_iter().map(|c| self.estimate(c)).collect()
        }
    }
}
