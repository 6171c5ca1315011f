use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::Attribution;
use crate::coalition::Coalition;
use crate::data::Instance;
use crate::error::{Error, Result};
use crate::kernel_regression::{constrained_wls, plan_coalitions};
use crate::model::Model;
use crate::rng::{derive_seed, label, rng_stream};

pub const DEFAULT_BACKGROUND: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundMode {
    ZeroBaseline,
    DataSampling,
}

impl BackgroundMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BackgroundMode::ZeroBaseline => "zero_baseline",
            BackgroundMode::DataSampling => "data_sampling",
        }
    }
}

/// Where absent features take their values from.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSpec {
    pub mode: BackgroundMode,
    /// Candidate rows (row-major, `d` columns) for data sampling.
    pub background_rows: Vec<Vec<f64>>,
    /// Rows drawn per explanation in data-sampling mode.
    pub n_background: usize,
}

impl BackgroundSpec {
    pub fn zero() -> Self {
        BackgroundSpec {
            mode: BackgroundMode::ZeroBaseline,
            background_rows: Vec::new(),
            n_background: 1,
        }
    }

    pub fn data(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("data sampling needs at least one background row".into()));
        }
        Ok(BackgroundSpec {
            mode: BackgroundMode::DataSampling,
            background_rows: rows,
            n_background: DEFAULT_BACKGROUND,
        })
    }

    pub fn with_n_background(mut self, n: usize) -> Self {
        self.n_background = n;
        self
    }

    /// The background rows used for one explanation.
    ///
    /// Data sampling draws `n_background` distinct rows uniformly, or all rows
    /// when fewer are available.
    pub fn draw(&self, d: usize, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
        match self.mode {
            BackgroundMode::ZeroBaseline => Ok(vec![vec![0.0; d]]),
            BackgroundMode::DataSampling => {
                if self.background_rows.is_empty() {
                    return Err(Error::InvalidInput(
                        "data sampling needs at least one background row".into(),
                    ));
                }
                if self.n_background == 0 {
                    return Err(Error::InvalidInput("n_background must be >= 1".into()));
                }
                if let Some(r) = self.background_rows.iter().find(|r| r.len() != d) {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: r.len(),
                    });
                }
                let n = self.background_rows.len();
                if self.n_background >= n {
                    return Ok(self.background_rows.clone());
                }
                let mut idx = sample(rng, n, self.n_background).into_vec();
                idx.sort_unstable();
                Ok(idx.into_iter().map(|i| self.background_rows[i].clone()).collect())
            }
        }
    }
}

/// Mean model output with `coalition` held at `x` and the rest taken from
/// each background row.
fn coalition_value<M: Model + ?Sized>(
    model: &M,
    x: &[f64],
    coalition: &Coalition,
    background: &[Vec<f64>],
) -> Result<f64> {
    let fixed = coalition.indicator();
    let mut row = vec![0.0; x.len()];
    let mut total = 0.0;
    for (r, b) in background.iter().enumerate() {
        for i in 0..x.len() {
            row[i] = if fixed[i] { x[i] } else { b[i] };
        }
        let y = model.predict(&row).map_err(|e| Error::ModelEval {
            row: r,
            message: e.to_string(),
        })?;
        if !y.is_finite() {
            return Err(Error::ModelEval {
                row: r,
                message: format!("non-finite output {y}"),
            });
        }
        total += y;
    }
    Ok(total / background.len() as f64)
}

/// KernelSHAP: Shapley values of `v(S) = E_b[Ω(x_S, b₋S)]` by constrained
/// kernel regression over `n_coalitions` coalitions (`∅` and `F` included).
///
/// `base_variance` of the result holds `v(∅)`.
pub fn kernelshap<M: Model + ?Sized>(
    model: &M,
    x: &Instance,
    background: &BackgroundSpec,
    n_coalitions: usize,
    master_seed: u64,
) -> Result<Attribution> {
    let d = x.len();
    if model.arity() != d {
        return Err(Error::DimensionMismatch {
            expected: model.arity(),
            got: d,
        });
    }
    if n_coalitions < d + 2 {
        return Err(Error::InvalidInput(format!(
            "n_coalitions must be >= d + 2 = {}, got {n_coalitions}",
            d + 2
        )));
    }
    let mut bg_rng = rng_stream(derive_seed(master_seed, label("kernelshap/background")), 0);
    let rows = background.draw(d, &mut bg_rng)?;
    let mut plan_rng = rng_stream(derive_seed(master_seed, label("kernelshap/plan")), 0);
    let plan = plan_coalitions(d, n_coalitions - 2, &mut plan_rng);

    let v_empty = coalition_value(model, x, &Coalition::empty(d), &rows)?;
    let v_full = coalition_value(model, x, &Coalition::full(d), &rows)?;
    let values = plan
        .par_iter()
        .map(|w| coalition_value(model, x, &w.coalition, &rows))
        .collect::<Result<Vec<f64>>>()?;
    let phi = constrained_wls(d, &plan, &values, v_empty, v_full)?;
    Ok(Attribution::new("kernelshap", phi, master_seed, v_empty)
        .with_param("background", background.mode.as_str())
        .with_param("n_background", rows.len())
        .with_param("coalitions", plan.len() + 2))
}
