use rand::seq::index::sample;

use crate::data::Instance;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng::RngStream;

use super::stats::{pearson, spearman};
use super::{MetricConfig, MetricScore};

fn eval<M: Model + ?Sized>(model: &M, z: &[f64]) -> Result<f64> {
    let y = model.predict(z)?;
    if !y.is_finite() {
        return Err(Error::ModelEval {
            row: 0,
            message: format!("non-finite output {y}"),
        });
    }
    Ok(y)
}

fn check(x: &Instance, phi: &[f64]) -> Result<()> {
    if phi.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: phi.len(),
        });
    }
    Ok(())
}

fn correlation_score(r: Option<f64>) -> MetricScore {
    match r {
        Some(v) => MetricScore::ok(v),
        None => MetricScore::flagged(0.0),
    }
}

/// Pearson correlation, over `runs` random feature subsets of size
/// `subset_size`, between the summed attribution of the subset and the
/// output drop when the subset is replaced by the baseline.
pub fn faithfulness_correlation<M: Model + ?Sized>(
    model: &M,
    x: &Instance,
    phi: &[f64],
    cfg: &MetricConfig,
    rng: &mut RngStream,
) -> Result<MetricScore> {
    check(x, phi)?;
    let d = x.len();
    if cfg.subset_size == 0 || cfg.subset_size > d {
        return Err(Error::InvalidInput(format!(
            "subset_size must be in 1..={d}, got {}",
            cfg.subset_size
        )));
    }
    let fx = eval(model, x)?;
    let mut attr = Vec::with_capacity(cfg.runs);
    let mut drop = Vec::with_capacity(cfg.runs);
    let mut z = x.to_vec();
    for _ in 0..cfg.runs {
        z.copy_from_slice(x);
        let subset = sample(rng, d, cfg.subset_size);
        let mut total = 0.0;
        for i in subset.iter() {
            z[i] = cfg.baseline_value(i, rng)?;
            total += phi[i];
        }
        attr.push(total);
        drop.push(fx - eval(model, &z)?);
    }
    Ok(correlation_score(pearson(&attr, &drop)))
}

/// Pearson correlation across features between `phi` and the output drop
/// when each feature alone is replaced by the baseline.
pub fn faithfulness_estimate<M: Model + ?Sized>(
    model: &M,
    x: &Instance,
    phi: &[f64],
    cfg: &MetricConfig,
    rng: &mut RngStream,
) -> Result<MetricScore> {
    check(x, phi)?;
    let d = x.len();
    if d < 2 {
        return Err(Error::InvalidInput("faithfulness_estimate needs d >= 2".into()));
    }
    let fx = eval(model, x)?;
    let mut drop = Vec::with_capacity(d);
    let mut z = x.to_vec();
    for i in 0..d {
        z[i] = cfg.baseline_value(i, rng)?;
        drop.push(fx - eval(model, &z)?);
        z[i] = x[i];
    }
    Ok(correlation_score(pearson(phi, &drop)))
}

/// Spearman correlation between `|phi|` and the mean squared output change
/// (over `n_metric_samples` baseline draws) from replacing each feature.
pub fn monotonicity_correlation<M: Model + ?Sized>(
    model: &M,
    x: &Instance,
    phi: &[f64],
    cfg: &MetricConfig,
    rng: &mut RngStream,
) -> Result<MetricScore> {
    check(x, phi)?;
    let d = x.len();
    if d < 2 {
        return Err(Error::InvalidInput("monotonicity_correlation needs d >= 2".into()));
    }
    let draws = cfg.n_metric_samples.max(1);
    let fx = eval(model, x)?;
    let mut change = Vec::with_capacity(d);
    let mut z = x.to_vec();
    for i in 0..d {
        let mut total = 0.0;
        for _ in 0..draws {
            z[i] = cfg.baseline_value(i, rng)?;
            total += (fx - eval(model, &z)?).powi(2);
        }
        z[i] = x[i];
        change.push(total / draws as f64);
    }
    let mag: Vec<f64> = phi.iter().map(|v| v.abs()).collect();
    Ok(correlation_score(spearman(&mag, &change)))
}
