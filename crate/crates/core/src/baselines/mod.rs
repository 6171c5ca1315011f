//! Comparison explainers: KernelSHAP and LIME.

mod kernelshap;
mod lime;

pub use kernelshap::{kernelshap, BackgroundMode, BackgroundSpec, DEFAULT_BACKGROUND};
pub use lime::{lime, weighted_lasso, LassoFit, LimeConfig, DEFAULT_LIME_SAMPLES};
