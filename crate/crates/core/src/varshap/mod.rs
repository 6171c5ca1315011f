//! VARSHAP: Shapley values of the local output-variance game.
//!
//! For an instance `x`, the game assigns to a coalition `S` the variance of
//! the model output when the features in `S` are held at `x` and the rest are
//! drawn from the instance-centred Gaussian of [`crate::perturb`]. Feature `j`
//! is credited with its Shapley-weighted average variance reduction
//!
//! ```text
//! Φⱼ = Σ_{S ⊆ F∖{j}} ω(|S|) · (Var(S) − Var(S ∪ {j})),   ω(s) = s!(k−s−1)!/k!
//! ```
//!
//! so `Σⱼ Φⱼ = Var(∅)` and an additive model gets `Φⱼ = Var(Ωⱼ(Xⱼ))`.
//! [`varshap_exact`] enumerates all `2^d` coalitions; [`varshap_sampled`]
//! fits the constrained kernel regression on a sampled design.

mod axioms;
mod game;

use serde::{Deserialize, Serialize};

use crate::attribution::Attribution;
use crate::coalition::{full_mask, Coalition};
use crate::data::Instance;
use crate::error::{Error, Result};
use crate::kernel_regression::{constrained_wls, plan_coalitions, WeightedCoalition};
use crate::model::Model;
use crate::perturb::PerturbationSpec;
use crate::rng::{derive_seed, label, rng_stream, RngStream};

pub use axioms::{verify_attribution_axioms, AxiomCheck, AxiomReport};
pub use game::{VarianceEstimate, SE_BATCHES};

use game::{estimate_variance, GameSampler, NoiseSource};

/// Largest `d` accepted by [`varshap_exact`].
pub const EXACT_LIMIT: usize = 20;

/// Which way round the marginal contribution is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// `Var(S) − Var(S ∪ {j})`: attributions are non-negative reductions.
    #[default]
    ReductionPositive,
    /// `Var(S ∪ {j}) − Var(S)`: every attribution negated.
    IncreasePositive,
}

impl SignConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            SignConvention::ReductionPositive => "reduction_positive",
            SignConvention::IncreasePositive => "increase_positive",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            SignConvention::ReductionPositive => v,
            SignConvention::IncreasePositive => -v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceGameConfig {
    /// Perturbed rows per coalition (`m`, at least 2).
    pub samples_per_coalition: usize,
    /// Share one block of Gaussian draws across all coalitions.
    pub paired_sampling: bool,
    pub sign_convention: SignConvention,
    /// Evaluate coalitions on the calling thread only.
    pub sequential: bool,
}

impl Default for VarianceGameConfig {
    fn default() -> Self {
        VarianceGameConfig {
            samples_per_coalition: 4096,
            paired_sampling: true,
            sign_convention: SignConvention::ReductionPositive,
            sequential: false,
        }
    }
}

impl VarianceGameConfig {
    pub fn with_samples(mut self, m: usize) -> Self {
        self.samples_per_coalition = m;
        self
    }

    pub fn with_pairing(mut self, paired: bool) -> Self {
        self.paired_sampling = paired;
        self
    }

    pub fn with_sign(mut self, sign: SignConvention) -> Self {
        self.sign_convention = sign;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.samples_per_coalition < 2 {
            return Err(Error::InvalidInput(format!(
                "samples_per_coalition must be >= 2, got {}",
                self.samples_per_coalition
            )));
        }
        Ok(())
    }
}

/// One row of a regression design: coalition, estimated variance, weight.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionSample {
    pub coalition: Coalition,
    pub value: f64,
    pub weight: f64,
}

/// Shapley kernel `ω(s) = s!(k−s−1)!/k!` for a coalition of size `s` out of `k`.
pub fn shapley_kernel_weight(s: usize, k: usize) -> Result<f64> {
    if k == 0 || s >= k {
        return Err(Error::InvalidInput(format!(
            "kernel weight needs 0 <= s < k, got s = {s}, k = {k}"
        )));
    }
    if k <= 20 {
        // factorials up to 20! are exact in f64
        let fact = |n: usize| (1..=n).fold(1.0f64, |acc, i| acc * i as f64);
        Ok(fact(s) * fact(k - s - 1) / fact(k))
    } else {
        Ok((ln_factorial(s) + ln_factorial(k - s - 1) - ln_factorial(k)).exp())
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Estimates `Var_Ω(S)` with fresh draws from `stream` (no pairing).
///
/// Returns exactly `0.0` for the full coalition without sampling.
pub fn variance_given_coalition<M: Model + ?Sized>(
    model: &M,
    x: &Instance,
    coalition: &Coalition,
    spec: &PerturbationSpec,
    cfg: &VarianceGameConfig,
    stream: RngStream,
) -> Result<f64> {
    cfg.validate()?;
    spec.check_dim(x.len())?;
    if coalition.dim() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: coalition.dim(),
        });
    }
    let sd = spec.perturbation_std();
    let est = estimate_variance(
        model,
        x,
        coalition,
        &sd,
        cfg.samples_per_coalition,
        NoiseSource::Stream(stream),
    )?;
    Ok(est.value)
}

/// The fully enumerated variance game, indexed by coalition mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactGame {
    pub d: usize,
    pub estimates: Vec<VarianceEstimate>,
}

impl ExactGame {
    pub fn values(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.value).collect()
    }

    pub fn empty_variance(&self) -> f64 {
        self.estimates[0].value
    }

    /// Exact Shapley reductions of the cached game.
    pub fn shapley(&self) -> Vec<f64> {
        shapley_reductions(&self.values(), self.d)
    }

    /// The constrained kernel regression over all `2^d` coalitions, on the
    /// same cached values.
    pub fn kernel_regression(&self) -> Result<Vec<f64>> {
        let plan = full_plan(self.d);
        let values: Vec<f64> = plan
            .iter()
            .map(|w| self.estimates[w.coalition.to_mask().expect("d <= 20") as usize].value)
            .collect();
        let phi = constrained_wls(self.d, &plan, &values, self.empty_variance(), 0.0)?;
        Ok(phi.into_iter().map(|v| -v).collect())
    }

    pub fn samples(&self) -> Vec<CoalitionSample> {
        let d = self.d;
        self.estimates
            .iter()
            .enumerate()
            .map(|(mask, e)| {
                let c = Coalition::from_mask(mask as u64, d).expect("mask in range");
                let weight = if c.is_empty() || c.is_full() {
                    f64::INFINITY
                } else {
                    kernel_regression_weight(c.len(), d)
                };
                CoalitionSample {
                    coalition: c,
                    value: e.value,
                    weight,
                }
            })
            .collect()
    }
}

/// A sampled variance game: `∅`, `F` and the planned coalitions.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGame {
    pub d: usize,
    pub empty: VarianceEstimate,
    pub plan: Vec<WeightedCoalition>,
    pub estimates: Vec<VarianceEstimate>,
}

impl SampledGame {
    pub fn samples(&self) -> Vec<CoalitionSample> {
        self.plan
            .iter()
            .zip(&self.estimates)
            .map(|(w, e)| CoalitionSample {
                coalition: w.coalition.clone(),
                value: e.value,
                weight: w.weight,
            })
            .collect()
    }

    fn reductions(&self, values: &[f64], empty: f64) -> Result<Vec<f64>> {
        let phi = constrained_wls(self.d, &self.plan, values, empty, 0.0)?;
        Ok(phi.into_iter().map(|v| -v).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VarianceGame {
    Exact(ExactGame),
    Sampled(SampledGame),
}

/// An attribution with its Monte-Carlo uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct VarshapReport {
    pub attribution: Attribution,
    /// Batch-means standard error of each `phi` entry.
    pub std_errors: Vec<f64>,
    /// Batch-means standard error of `Var(∅)`.
    pub base_variance_se: f64,
    pub game: VarianceGame,
}

impl VarshapReport {
    /// `sqrt(Σ SE(Φⱼ)² + SE(Var(∅))²)`, the scale for efficiency checks.
    pub fn combined_se(&self) -> f64 {
        (self.std_errors.iter().map(|s| s * s).sum::<f64>() + self.base_variance_se.powi(2)).sqrt()
    }
}

/// Exact VARSHAP by enumerating all `2^d` coalitions (`d <= 20`).
pub fn varshap_exact<M: Model + ?Sized>(
    model: &M,
    x: &Instance,
    spec: &PerturbationSpec,
    cfg: &VarianceGameConfig,
    master_seed: u64,
) -> Result<Attribution> {
    varshap_exact_report(model, x, spec, cfg, master_seed).map(|r| r.attribution)
}

pub fn varshap_exact_report<M: Model + ?Sized>(
    model: &M,
    x: &Instance,
    spec: &PerturbationSpec,
    cfg: &VarianceGameConfig,
    master_seed: u64,
) -> Result<VarshapReport> {
    let d = x.len();
    if d > EXACT_LIMIT {
        return Err(Error::TooManyFeatures {
            features: d,
            limit: EXACT_LIMIT,
        });
    }
    let sampler = GameSampler::new(model, x, spec, cfg, master_seed)?;
    let coalitions: Vec<Coalition> = (0..=full_mask(d))
        .map(|mask| Coalition::from_mask(mask, d).expect("mask in range"))
        .collect();
    let estimates = sampler.estimate_all(&coalitions)?;
    let game = ExactGame { d, estimates };

    let reductions = game.shapley();
    let k = game.estimates[0].batches.len();
    let batch_phi: Vec<Vec<f64>> = (0..k)
        .map(|b| {
            let values: Vec<f64> = game.estimates.iter().map(|e| e.batches[b]).collect();
            shapley_reductions(&values, d)
        })
        .collect();
    let base = game.empty_variance();
    let base_batches: Vec<f64> = game.estimates[0].batches.clone();
    let attribution = finish(
        "varshap",
        &reductions,
        base,
        spec,
        cfg,
        master_seed,
        "exact",
        1usize << d,
    );
    Ok(VarshapReport {
        attribution,
        std_errors: batch_standard_errors(&batch_phi, d),
        base_variance_se: batch_se(&base_batches),
        game: VarianceGame::Exact(game),
    })
}

/// VARSHAP from a sampled coalition design and the constrained kernel
/// regression; `n_coalitions` counts `∅` and `F`.
pub fn varshap_sampled<M: Model + ?Sized>(
    model: &M,
    x: &Instance,
    spec: &PerturbationSpec,
    cfg: &VarianceGameConfig,
    n_coalitions: usize,
    master_seed: u64,
) -> Result<Attribution> {
    varshap_sampled_report(model, x, spec, cfg, n_coalitions, master_seed).map(|r| r.attribution)
}

pub fn varshap_sampled_report<M: Model + ?Sized>(
    model: &M,
    x: &Instance,
    spec: &PerturbationSpec,
    cfg: &VarianceGameConfig,
    n_coalitions: usize,
    master_seed: u64,
) -> Result<VarshapReport> {
    let d = x.len();
    if n_coalitions < d + 2 {
        return Err(Error::InvalidInput(format!(
            "n_coalitions must be >= d + 2 = {}, got {n_coalitions}",
            d + 2
        )));
    }
    let sampler = GameSampler::new(model, x, spec, cfg, master_seed)?;
    let mut plan_rng = rng_stream(derive_seed(master_seed, label("varshap/plan")), 0);
    let plan = plan_coalitions(d, n_coalitions - 2, &mut plan_rng);

    let mut coalitions: Vec<Coalition> = vec![Coalition::empty(d)];
    coalitions.extend(plan.iter().map(|w| w.coalition.clone()));
    let mut estimates = sampler.estimate_all(&coalitions)?;
    let empty = estimates.remove(0);
    let game = SampledGame {
        d,
        empty,
        plan,
        estimates,
    };

    let values: Vec<f64> = game.estimates.iter().map(|e| e.value).collect();
    let reductions = game.reductions(&values, game.empty.value)?;
    let k = game.empty.batches.len();
    let batch_phi = (0..k)
        .map(|b| {
            let values: Vec<f64> = game.estimates.iter().map(|e| e.batches[b]).collect();
            game.reductions(&values, game.empty.batches[b])
        })
        .collect::<Result<Vec<_>>>()?;
    let attribution = finish(
        "varshap",
        &reductions,
        game.empty.value,
        spec,
        cfg,
        master_seed,
        "sampled",
        game.plan.len() + 2,
    );
    Ok(VarshapReport {
        attribution,
        std_errors: batch_standard_errors(&batch_phi, d),
        base_variance_se: batch_se(&game.empty.batches),
        game: VarianceGame::Sampled(game),
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    method: &str,
    reductions: &[f64],
    base: f64,
    spec: &PerturbationSpec,
    cfg: &VarianceGameConfig,
    seed: u64,
    estimator: &str,
    coalitions: usize,
) -> Attribution {
    let phi = reductions
        .iter()
        .map(|&v| cfg.sign_convention.apply(v))
        .collect();
    Attribution::new(method, phi, seed, base)
        .with_param("sigma", spec.sigma())
        .with_param("alpha", spec.alpha())
        .with_param("samples", cfg.samples_per_coalition)
        .with_param("paired_sampling", cfg.paired_sampling)
        .with_param("sign_convention", cfg.sign_convention.as_str())
        .with_param("estimator", estimator)
        .with_param("coalitions", coalitions)
}

/// `Φⱼ = Σ_{S∌j} ω(|S|)(v(S) − v(S∪{j}))` for a game given by mask.
pub fn shapley_reductions(values: &[f64], d: usize) -> Vec<f64> {
    assert_eq!(values.len(), 1usize << d);
    let omega: Vec<f64> = (0..d)
        .map(|s| shapley_kernel_weight(s, d).expect("s < d"))
        .collect();
    (0..d)
        .map(|j| {
            let bit = 1usize << j;
            let mut acc = 0.0;
            for mask in 0..values.len() {
                if mask & bit == 0 {
                    let s = (mask as u64).count_ones() as usize;
                    acc += omega[s] * (values[mask] - values[mask | bit]);
                }
            }
            acc
        })
        .collect()
}

/// Regression weight of a size-`s` coalition: `(d−1) / (C(d,s)·s·(d−s))`.
pub fn kernel_regression_weight(s: usize, d: usize) -> f64 {
    (d - 1) as f64 / (crate::kernel_regression::binomial(d, s) * (s * (d - s)) as f64)
}

fn full_plan(d: usize) -> Vec<WeightedCoalition> {
    // a complete budget enumerates every size class and draws no randomness
    let budget = (1usize << d) - 2;
    plan_coalitions(d, budget, &mut rng_stream(0, 0))
}

fn batch_se(values: &[f64]) -> f64 {
    let k = values.len();
    if k < 2 {
        return f64::INFINITY;
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (var / k as f64).sqrt()
}

fn batch_standard_errors(batch_phi: &[Vec<f64>], d: usize) -> Vec<f64> {
    (0..d)
        .map(|j| {
            let col: Vec<f64> = batch_phi.iter().map(|p| p[j]).collect();
            batch_se(&col)
        })
        .collect()
}

#[cfg(test)]
mod tests;
