use varshap::baselines::{kernelshap, lime, BackgroundMode, BackgroundSpec, LimeConfig};
use varshap::varshap::SignConvention;
use varshap::{varshap_exact, varshap_sampled, Attribution, Error, Instance, Model, PerturbationSpec, Result, VarianceGameConfig};

/// Above this many features, coalitions are sampled by default.
pub const EXACT_UP_TO: usize = 10;

/// Default coalition budget for `d` features when not enumerating.
pub fn default_budget(d: usize) -> usize {
    let all = if d < 63 { 1usize << d } else { usize::MAX };
    (2 * d + 2048).min(all)
}

/// A fully resolved explainer configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Recipe {
    Varshap {
        sigma: f64,
        samples: usize,
        paired: bool,
        sign: SignConvention,
        /// `None` enumerates every coalition.
        coalitions: Option<usize>,
    },
    Kernelshap {
        background: BackgroundMode,
        n_background: usize,
        coalitions: usize,
    },
    Lime {
        sparsity: f64,
        kernel_width: Option<f64>,
        samples: usize,
        sigma: f64,
    },
}

/// Data an explainer may draw on besides the model.
pub struct Env<'a> {
    pub model: &'a dyn Model,
    pub feature_std: &'a [f64],
    pub background: &'a [Vec<f64>],
}

impl Recipe {
    pub fn run(&self, env: &Env<'_>, x: &Instance, seed: u64) -> Result<Attribution> {
        match self {
            Recipe::Varshap {
                sigma,
                samples,
                paired,
                sign,
                coalitions,
            } => {
                let spec = PerturbationSpec::new(env.feature_std.to_vec(), *sigma)?;
                let cfg = VarianceGameConfig::default()
                    .with_samples(*samples)
                    .with_pairing(*paired)
                    .with_sign(*sign);
                match coalitions {
                    None => varshap_exact(env.model, x, &spec, &cfg, seed),
                    Some(n) => varshap_sampled(env.model, x, &spec, &cfg, *n, seed),
                }
            }
            Recipe::Kernelshap {
                background,
                n_background,
                coalitions,
            } => {
                let bg = match background {
                    BackgroundMode::ZeroBaseline => BackgroundSpec::zero(),
                    BackgroundMode::DataSampling => {
                        BackgroundSpec::data(env.background.to_vec())?.with_n_background(*n_background)
                    }
                };
                kernelshap(env.model, x, &bg, *coalitions, seed)
            }
            Recipe::Lime {
                sparsity,
                kernel_width,
                samples,
                sigma,
            } => {
                let spec = PerturbationSpec::new(env.feature_std.to_vec(), *sigma)?;
                let cfg = LimeConfig {
                    sparsity: *sparsity,
                    kernel_width: *kernel_width,
                    n_samples: *samples,
                };
                lime(env.model, x, &spec, &cfg, seed)
            }
        }
    }

    /// Rebuilds the recipe recorded in an attribution's params.
    pub fn from_attribution(a: &Attribution) -> Result<Self> {
        let f = |key: &str| {
            a.param_f64(key)
                .ok_or_else(|| Error::InvalidInput(format!("attribution params lack `{key}`")))
        };
        let u = |key: &str| f(key).map(|v| v as usize);
        let s = |key: &str| {
            a.params
                .get(key)
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::InvalidInput(format!("attribution params lack `{key}`")))
        };
        match a.method.as_str() {
            "varshap" => Ok(Recipe::Varshap {
                sigma: f("sigma")?,
                samples: u("samples")?,
                paired: a.params.get("paired_sampling").and_then(|v| v.as_bool()).unwrap_or(true),
                sign: match s("sign_convention")? {
                    "increase_positive" => SignConvention::IncreasePositive,
                    _ => SignConvention::ReductionPositive,
                },
                coalitions: match s("estimator")? {
                    "exact" => None,
                    _ => Some(u("coalitions")?),
                },
            }),
            "kernelshap" => Ok(Recipe::Kernelshap {
                background: match s("background")? {
                    "zero_baseline" => BackgroundMode::ZeroBaseline,
                    _ => BackgroundMode::DataSampling,
                },
                n_background: u("n_background")?,
                coalitions: u("coalitions")?,
            }),
            "lime" => Ok(Recipe::Lime {
                sparsity: f("sparsity")?,
                kernel_width: Some(f("kernel_width")?),
                samples: u("samples")?,
                sigma: f("sigma")?,
            }),
            other => Err(Error::InvalidInput(format!("unknown method `{other}`"))),
        }
    }
}
