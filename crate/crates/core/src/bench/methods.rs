use std::fmt;

use serde::{Deserialize, Serialize};

use crate::attribution::Attribution;
use crate::baselines::{kernelshap, lime, BackgroundMode, BackgroundSpec, LimeConfig, DEFAULT_BACKGROUND, DEFAULT_LIME_SAMPLES};
use crate::data::Instance;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::perturb::PerturbationSpec;
use crate::varshap::{varshap_exact, varshap_sampled, VarianceGameConfig};

/// One explainer configuration of the benchmark grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodPreset {
    Varshap { sigma: f64 },
    Kernelshap { background: BackgroundMode },
    Lime { sparsity: f64 },
}

impl MethodPreset {
    /// The eight presets compared by default.
    pub fn defaults() -> Vec<MethodPreset> {
        vec![
            MethodPreset::Varshap { sigma: 0.3 },
            MethodPreset::Varshap { sigma: 0.6 },
            MethodPreset::Varshap { sigma: 1.0 },
            MethodPreset::Kernelshap {
                background: BackgroundMode::ZeroBaseline,
            },
            MethodPreset::Kernelshap {
                background: BackgroundMode::DataSampling,
            },
            MethodPreset::Lime { sparsity: 0.5 },
            MethodPreset::Lime { sparsity: 1.5 },
            MethodPreset::Lime { sparsity: 5.0 },
        ]
    }

    pub fn family(&self) -> &'static str {
        match self {
            MethodPreset::Varshap { .. } => "varshap",
            MethodPreset::Kernelshap { .. } => "kernelshap",
            MethodPreset::Lime { .. } => "lime",
        }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    /// Recovers the preset that produced `a` from its method and params.
    pub fn from_attribution(a: &Attribution) -> Result<Self> {
        let missing = |key: &str| Error::InvalidInput(format!("attribution params lack `{key}`"));
        match a.method.as_str() {
            "varshap" => Ok(MethodPreset::Varshap {
                sigma: a.param_f64("sigma").ok_or_else(|| missing("sigma"))?,
            }),
            "lime" => Ok(MethodPreset::Lime {
                sparsity: a.param_f64("sparsity").ok_or_else(|| missing("sparsity"))?,
            }),
            "kernelshap" => {
                let bg = a.params.get("background").and_then(|v| v.as_str()).ok_or_else(|| missing("background"))?;
                let background = match bg {
                    "zero_baseline" => BackgroundMode::ZeroBaseline,
                    "data_sampling" => BackgroundMode::DataSampling,
                    other => return Err(Error::InvalidInput(format!("unknown background `{other}`"))),
                };
                Ok(MethodPreset::Kernelshap { background })
            }
            other => Err(Error::InvalidInput(format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for MethodPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodPreset::Varshap { sigma } => write!(f, "varshap(sigma={sigma})"),
            MethodPreset::Kernelshap { background } => write!(f, "kernelshap({})", background.as_str()),
            MethodPreset::Lime { sparsity } => write!(f, "lime(sparsity={sparsity})"),
        }
    }
}

/// Sample sizes shared by all presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainSettings {
    /// Perturbed rows per coalition for VARSHAP.
    pub varshap_samples: usize,
    pub lime_samples: usize,
    pub n_background: usize,
    /// Up to this many features every coalition is evaluated.
    pub exact_up_to: usize,
    /// Coalition budget above `exact_up_to`; `None` means `2d + 2048`.
    pub coalitions: Option<usize>,
}

impl Default for ExplainSettings {
    fn default() -> Self {
        ExplainSettings {
            varshap_samples: 2048,
            lime_samples: DEFAULT_LIME_SAMPLES,
            n_background: DEFAULT_BACKGROUND,
            exact_up_to: 10,
            coalitions: None,
        }
    }
}

impl ExplainSettings {
    fn budget(&self, d: usize) -> usize {
        let all = if d < 63 { 1usize << d } else { usize::MAX };
        self.coalitions.unwrap_or(2 * d + 2048).min(all)
    }

    fn exact(&self, d: usize) -> bool {
        d <= self.exact_up_to
    }
}

/// What an explainer may use besides the model and the instance.
#[derive(Clone, Copy)]
pub struct ExplainContext<'a> {
    pub model: &'a dyn Model,
    /// Per-feature spread `σ̂` of the training data.
    pub feature_std: &'a [f64],
    /// Candidate background rows for data-sampling KernelSHAP.
    pub background: &'a [Vec<f64>],
    pub settings: &'a ExplainSettings,
}

impl ExplainContext<'_> {
    /// Runs `preset` at `x` with `seed`; the instance is recorded in params.
    pub fn explain(&self, preset: &MethodPreset, x: &Instance, seed: u64) -> Result<Attribution> {
        let d = x.len();
        let s = self.settings;
        let a = match *preset {
            MethodPreset::Varshap { sigma } => {
                let spec = PerturbationSpec::new(self.feature_std.to_vec(), sigma)?;
                let cfg = VarianceGameConfig::default().with_samples(s.varshap_samples);
                if s.exact(d) {
                    varshap_exact(self.model, x, &spec, &cfg, seed)?
                } else {
                    varshap_sampled(self.model, x, &spec, &cfg, s.budget(d), seed)?
                }
            }
            MethodPreset::Kernelshap { background } => {
                let bg = match background {
                    BackgroundMode::ZeroBaseline => BackgroundSpec::zero(),
                    BackgroundMode::DataSampling => {
                        BackgroundSpec::data(self.background.to_vec())?.with_n_background(s.n_background)
                    }
                };
                let budget = if s.exact(d) { 1usize << d } else { s.budget(d) };
                kernelshap(self.model, x, &bg, budget, seed)?
            }
            MethodPreset::Lime { sparsity } => {
                let spec = PerturbationSpec::new(self.feature_std.to_vec(), 1.0)?;
                let cfg = LimeConfig {
                    sparsity,
                    kernel_width: None,
                    n_samples: s.lime_samples,
                };
                lime(self.model, x, &spec, &cfg, seed)?
            }
        };
        Ok(a.with_param("preset", preset.name()).with_param("instance", x.to_vec()))
    }
}
