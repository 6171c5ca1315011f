//! Instance-centred Gaussian perturbation `N(x, diag(α·σ̂ᵢ²))` with `α = sigma²`.

use rand_distr::{Distribution, StandardNormal};

use crate::coalition::Coalition;
use crate::data::{Dataset, Instance};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Per-feature spread estimated from data plus the locality scale.
///
/// `sigma` multiplies standard deviations, so the perturbation variance of
/// feature `i` is `sigma² · feature_std[i]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    feature_std: Vec<f64>,
    sigma: f64,
}

impl PerturbationSpec {
    pub fn new(feature_std: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidInput(format!("sigma must be finite and > 0, got {sigma}")));
        }
        if feature_std.is_empty() {
            return Err(Error::InvalidInput("feature_std is empty".into()));
        }
        if let Some(i) = feature_std.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "feature_std[{i}] must be finite and >= 0, got {}",
                feature_std[i]
            )));
        }
        Ok(PerturbationSpec { feature_std, sigma })
    }

    /// Spec with `σ̂ᵢ` estimated from `data`.
    pub fn from_dataset(data: &Dataset, sigma: f64) -> Result<Self> {
        let std = estimate_feature_stats(data)?.into_iter().map(f64::sqrt).collect();
        Self::new(std, sigma)
    }

    pub fn dim(&self) -> usize {
        self.feature_std.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn alpha(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn feature_std(&self) -> &[f64] {
        &self.feature_std
    }

    /// Standard deviation of each perturbed coordinate: `sigma · σ̂ᵢ`.
    pub fn perturbation_std(&self) -> Vec<f64> {
        self.feature_std.iter().map(|s| self.sigma * s).collect()
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: d,
            });
        }
        Ok(())
    }
}

/// Unbiased (divisor `n − 1`) sample variance of every column.
pub fn estimate_feature_stats(data: &Dataset) -> Result<Vec<f64>> {
    let n = data.n_rows();
    if n < 2 {
        return Err(Error::InvalidInput(format!("variance needs n >= 2, got {n}")));
    }
    let d = data.n_features();
    let mut mean = vec![0.0; d];
    for row in data.rows() {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut ss = vec![0.0; d];
    for row in data.rows() {
        for ((s, v), m) in ss.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    Ok(ss.into_iter().map(|s| s / (n - 1) as f64).collect())
}

/// Row-major `rows × cols` sample block.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl SampleMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }
}

/// Draws `m` points from `Π(x)` with the members of `fixed` held at `x`.
///
/// Normals are drawn row by row, one per perturbed column; fixed columns
/// consume no randomness.
pub fn sample_perturbed(
    x: &Instance,
    fixed: &Coalition,
    spec: &PerturbationSpec,
    m: usize,
    stream: &mut RngStream,
) -> Result<SampleMatrix> {
    let d = x.len();
    spec.check_dim(d)?;
    if fixed.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: fixed.dim(),
        });
    }
    if m == 0 {
        return Err(Error::InvalidInput("sample count must be >= 1".into()));
    }
    let sd = spec.perturbation_std();
    let is_fixed = fixed.indicator();
    let mut data = Vec::with_capacity(m * d);
    for _ in 0..m {
        for i in 0..d {
            if is_fixed[i] {
                data.push(x[i]);
            } else {
                let z: f64 = StandardNormal.sample(stream);
                data.push(x[i] + sd[i] * z);
            }
        }
    }
    Ok(SampleMatrix {
        rows: m,
        cols: d,
        data,
    })
}

/// `m × d` standard normals shared by all coalitions of one explanation.
pub(crate) fn standard_normals(m: usize, d: usize, stream: &mut RngStream) -> Vec<f64> {
    (0..m * d).map(|_| StandardNormal.sample(stream)).collect()
}
