//! Attribution-quality metrics: faithfulness, robustness and complexity.
//!
//! Faithfulness metrics compare attributions with output changes when
//! features are replaced by a baseline. Robustness metrics re-run the
//! explainer near `x` and measure how far the attribution moves. Complexity
//! metrics look only at the attribution vector.
//!
//! A score that is undefined for its inputs (a correlation over a flat
//! series, the entropy of an all-zero vector) is returned with `flagged`
//! set. Flagged correlations carry the value 0, other flagged scores NaN.

mod complexity;
mod faithfulness;
mod robustness;
pub mod stats;

use serde::{Deserialize, Serialize};

use crate::data::Instance;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng::{derive_seed, label, rng_stream};

pub use complexity::{complexity, effective_complexity, sparseness};
pub use faithfulness::{faithfulness_correlation, faithfulness_estimate, monotonicity_correlation};
pub use robustness::{local_lipschitz_estimate, max_sensitivity, relative_input_stability, STABILITY_EPS};

/// Replacement values for "removed" features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbBaseline {
    /// All zeros (the mean of standardized features).
    Black,
    /// Independent uniform draws over each feature's observed range.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub runs: usize,
    pub subset_size: usize,
    pub perturb_baseline: PerturbBaseline,
    pub n_metric_samples: usize,
    pub noise_std: f64,
    pub lower_bound: f64,
    pub epsilon: f64,
    /// Per-feature `(min, max)` for the uniform baseline.
    #[serde(skip)]
    pub feature_ranges: Option<Vec<(f64, f64)>>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            runs: 100,
            subset_size: 6,
            perturb_baseline: PerturbBaseline::Uniform,
            n_metric_samples: 10,
            noise_std: 0.2,
            lower_bound: 0.02,
            epsilon: 0.05,
            feature_ranges: None,
        }
    }
}

impl MetricConfig {
    pub fn with_ranges(mut self, ranges: Vec<(f64, f64)>) -> Self {
        self.feature_ranges = Some(ranges);
        self
    }

    pub fn with_baseline(mut self, baseline: PerturbBaseline) -> Self {
        self.perturb_baseline = baseline;
        self
    }

    /// Draws one baseline value for feature `i`.
    pub(crate) fn baseline_value(&self, i: usize, rng: &mut impl rand::Rng) -> Result<f64> {
        match self.perturb_baseline {
            PerturbBaseline::Black => Ok(0.0),
            PerturbBaseline::Uniform => {
                let ranges = self.feature_ranges.as_ref().ok_or_else(|| {
                    Error::InvalidInput("the uniform baseline needs feature ranges".into())
                })?;
                let (lo, hi) = *ranges.get(i).ok_or(Error::DimensionMismatch {
                    expected: i + 1,
                    got: ranges.len(),
                })?;
                if hi > lo {
                    Ok(rng.random_range(lo..hi))
                } else {
                    Ok(lo)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub value: f64,
    pub flagged: bool,
}

impl MetricScore {
    pub fn ok(value: f64) -> Self {
        MetricScore {
            value,
            flagged: false,
        }
    }

    pub fn flagged(value: f64) -> Self {
        MetricScore {
            value,
            flagged: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::HigherBetter => "higher_better",
            Direction::LowerBetter => "lower_better",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    FaithfulnessCorrelation,
    FaithfulnessEstimate,
    MonotonicityCorrelation,
    LocalLipschitzEstimate,
    MaxSensitivity,
    RelativeInputStability,
    Sparseness,
    Complexity,
    EffectiveComplexity,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::FaithfulnessCorrelation,
        Metric::FaithfulnessEstimate,
        Metric::MonotonicityCorrelation,
        Metric::LocalLipschitzEstimate,
        Metric::MaxSensitivity,
        Metric::RelativeInputStability,
        Metric::Sparseness,
        Metric::Complexity,
        Metric::EffectiveComplexity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::FaithfulnessCorrelation => "faithfulness_correlation",
            Metric::FaithfulnessEstimate => "faithfulness_estimate",
            Metric::MonotonicityCorrelation => "monotonicity_correlation",
            Metric::LocalLipschitzEstimate => "local_lipschitz_estimate",
            Metric::MaxSensitivity => "max_sensitivity",
            Metric::RelativeInputStability => "relative_input_stability",
            Metric::Sparseness => "sparseness",
            Metric::Complexity => "complexity",
            Metric::EffectiveComplexity => "effective_complexity",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Metric::FaithfulnessCorrelation
            | Metric::FaithfulnessEstimate
            | Metric::MonotonicityCorrelation
            | Metric::Sparseness => Direction::HigherBetter,
            _ => Direction::LowerBetter,
        }
    }

    pub fn family(self) -> &'static str {
        match self {
            Metric::FaithfulnessCorrelation | Metric::FaithfulnessEstimate | Metric::MonotonicityCorrelation => {
                "faithfulness"
            }
            Metric::LocalLipschitzEstimate | Metric::MaxSensitivity | Metric::RelativeInputStability => {
                "robustness"
            }
            Metric::Sparseness | Metric::Complexity | Metric::EffectiveComplexity => "complexity",
        }
    }

    /// Whether the score depends on the perturbation baseline.
    pub fn uses_baseline(self) -> bool {
        self.family() == "faithfulness"
    }
}

/// A metric, optionally forced onto the black baseline (`<name>_black`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetricSpec {
    pub metric: Metric,
    pub black: bool,
}

impl MetricSpec {
    pub fn plain(metric: Metric) -> Self {
        MetricSpec { metric, black: false }
    }

    pub fn name(&self) -> String {
        if self.black {
            format!("{}_black", self.metric.name())
        } else {
            self.metric.name().to_string()
        }
    }

    pub fn direction(&self) -> Direction {
        self.metric.direction()
    }

    pub fn parse(name: &str) -> Option<Self> {
        let (base, black) = match name.strip_suffix("_black") {
            Some(b) => (b, true),
            None => (name, false),
        };
        let metric = Metric::ALL.into_iter().find(|m| m.name() == base)?;
        if black && !metric.uses_baseline() {
            return None;
        }
        Some(MetricSpec { metric, black })
    }

    /// The nine metrics, plus the `_black` faithfulness variants if asked.
    pub fn suite(both_baselines: bool) -> Vec<MetricSpec> {
        let mut out: Vec<MetricSpec> = Metric::ALL.into_iter().map(MetricSpec::plain).collect();
        if both_baselines {
            out.extend(
                Metric::ALL
                    .into_iter()
                    .filter(|m| m.uses_baseline())
                    .map(|metric| MetricSpec { metric, black: true }),
            );
        }
        out
    }
}

/// Something that can be asked for an attribution at any point.
pub trait Explainer: Send + Sync {
    fn explain(&self, x: &Instance, seed: u64) -> Result<Vec<f64>>;
}

impl<F> Explainer for F
where
    F: Fn(&Instance, u64) -> Result<Vec<f64>> + Send + Sync,
{
    fn explain(&self, x: &Instance, seed: u64) -> Result<Vec<f64>> {
        self(x, seed)
    }
}

/// Everything one instance's metric evaluation needs.
pub struct MetricInput<'a> {
    pub model: &'a dyn Model,
    pub explainer: &'a dyn Explainer,
    pub x: &'a Instance,
    pub phi: &'a [f64],
    /// Seed the explainer was run with; robustness re-runs reuse it.
    pub explain_seed: u64,
}

/// Scores one metric; randomness comes from a stream named after it.
pub fn evaluate(spec: MetricSpec, input: &MetricInput<'_>, cfg: &MetricConfig, seed: u64) -> Result<MetricScore> {
    let name = spec.name();
    let mut rng = rng_stream(derive_seed(seed, label(&format!("metrics/{name}"))), 0);
    let black;
    let cfg = if spec.black {
        black = cfg.clone().with_baseline(PerturbBaseline::Black);
        &black
    } else {
        cfg
    };
    let MetricInput {
        model,
        explainer,
        x,
        phi,
        explain_seed,
    } = *input;
    match spec.metric {
        Metric::FaithfulnessCorrelation => faithfulness_correlation(model, x, phi, cfg, &mut rng),
        Metric::FaithfulnessEstimate => faithfulness_estimate(model, x, phi, cfg, &mut rng),
        Metric::MonotonicityCorrelation => monotonicity_correlation(model, x, phi, cfg, &mut rng),
        Metric::LocalLipschitzEstimate => local_lipschitz_estimate(explainer, x, phi, explain_seed, cfg, &mut rng),
        Metric::MaxSensitivity => max_sensitivity(explainer, x, phi, explain_seed, cfg, &mut rng),
        Metric::RelativeInputStability => relative_input_stability(explainer, x, phi, explain_seed, cfg, &mut rng),
        Metric::Sparseness => Ok(sparseness(phi)),
        Metric::Complexity => Ok(complexity(phi)),
        Metric::EffectiveComplexity => Ok(effective_complexity(phi, cfg)),
    }
}

/// Per-instance scores of one metric and their median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric_name: String,
    pub per_instance: Vec<f64>,
    pub flagged: Vec<bool>,
    /// Lower median of the unflagged scores; `None` when all are flagged.
    pub median: Option<f64>,
    pub n_flagged: usize,
    pub direction: Direction,
}

impl MetricReport {
    pub fn new(metric_name: impl Into<String>, direction: Direction, scores: &[MetricScore]) -> Self {
        let valid: Vec<f64> = scores.iter().filter(|s| !s.flagged).map(|s| s.value).collect();
        MetricReport {
            metric_name: metric_name.into(),
            per_instance: scores.iter().map(|s| s.value).collect(),
            flagged: scores.iter().map(|s| s.flagged).collect(),
            median: stats::lower_median(&valid),
            n_flagged: scores.len() - valid.len(),
            direction,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinearModel;

    #[test]
    fn defaults() {
        let c = MetricConfig::default();
        assert_eq!((c.runs, c.subset_size, c.n_metric_samples), (100, 6, 10));
        assert_eq!((c.noise_std, c.lower_bound, c.epsilon), (0.2, 0.02, 0.05));
    }

    #[test]
    fn report_median_skips_flagged() {
        let scores = [
            MetricScore::ok(0.4),
            MetricScore::flagged(0.0),
            MetricScore::ok(0.1),
            MetricScore::ok(0.3),
            MetricScore::ok(0.2),
        ];
        let r = MetricReport::new("x", Direction::HigherBetter, &scores);
        assert_eq!(r.median, Some(0.2));
        assert_eq!(r.n_flagged, 1);
        assert_eq!(r.per_instance.len(), 5);
        let none = MetricReport::new("x", Direction::LowerBetter, &[MetricScore::flagged(f64::NAN)]);
        assert_eq!(none.median, None);
    }

    #[test]
    fn spec_names_round_trip() {
        for s in MetricSpec::suite(true) {
            assert_eq!(MetricSpec::parse(&s.name()), Some(s));
        }
        assert_eq!(MetricSpec::suite(false).len(), 9);
        assert_eq!(MetricSpec::suite(true).len(), 12);
        assert_eq!(MetricSpec::parse("sparseness_black"), None);
        assert_eq!(MetricSpec::parse("nope"), None);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let model = LinearModel::new(vec![1.0, -2.0, 0.5], 0.0);
        let x = Instance::new(vec![0.3, 0.2, -1.0]).unwrap();
        let explainer = |x: &Instance, _seed: u64| -> Result<Vec<f64>> { Ok(vec![x[0], -2.0 * x[1], 0.5 * x[2]]) };
        let phi = explainer(&x, 0).unwrap();
        let cfg = MetricConfig::default().with_ranges(vec![(-2.0, 2.0); 3]);
        let input = MetricInput {
            model: &model,
            explainer: &explainer,
            x: &x,
            phi: &phi,
            explain_seed: 0,
        };
        for spec in MetricSpec::suite(true) {
            let a = evaluate(spec, &input, &MetricConfig { subset_size: 2, ..cfg.clone() }, 17).unwrap();
            let b = evaluate(spec, &input, &MetricConfig { subset_size: 2, ..cfg.clone() }, 17).unwrap();
            assert_eq!(a.value.to_bits(), b.value.to_bits(), "{}", spec.name());
            assert_eq!(a.flagged, b.flagged);
        }
    }

    #[test]
    fn uniform_baseline_needs_ranges() {
        let model = LinearModel::new(vec![1.0, 1.0], 0.0);
        let x = Instance::new(vec![0.3, 0.2]).unwrap();
        let mut rng = rng_stream(0, 0);
        let cfg = MetricConfig {
            subset_size: 1,
            ..MetricConfig::default()
        };
        assert!(faithfulness_correlation(&model, &x, &[0.3, 0.2], &cfg, &mut rng).is_err());
    }
}
