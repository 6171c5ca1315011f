//! Variance-reduction Shapley attributions (VARSHAP) for black-box models,
//! KernelSHAP and LIME baselines, attribution-quality metrics, synthetic
//! case-study data and a ranking benchmark.
//!
//! Every estimator is deterministic given a master seed: randomness comes
//! from counter-based streams ([`rng::rng_stream`]) addressed by purpose and
//! index, so results do not depend on the number of worker threads.

pub mod attribution;
pub mod baselines;
pub mod bench;
pub mod coalition;
pub mod data;
pub mod error;
pub mod kernel_regression;
pub mod metrics;
pub mod model;
pub mod perturb;
pub mod rng;
pub mod synth;
pub mod varshap;

pub use attribution::{load_attribution, save_attribution, Attribution};
pub use coalition::Coalition;
pub use data::{load_dataset, Dataset, Instance, Normalization};
pub use error::{Error, Result};
pub use model::{load_model, Model};
pub use perturb::{estimate_feature_stats, sample_perturbed, PerturbationSpec};
pub use rng::rng_stream;
pub use varshap::{
    shapley_kernel_weight, variance_given_coalition, varshap_exact, varshap_sampled, SignConvention,
    VarianceGameConfig,
};
