//! Randomized checks of the properties a variance-based attribution relies on.

use rand::Rng;

use crate::coalition::Coalition;
use crate::data::Instance;
use crate::error::Result;
use crate::model::{Activation, Dense, FnModel, Mlp, Model};
use crate::perturb::{sample_perturbed, PerturbationSpec};
use crate::rng::{derive_seed, label, rng_stream};

use super::{varshap_exact, VarianceGameConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AxiomReport {
    pub checks: Vec<AxiomCheck>,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AxiomCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: String, passed: bool, detail: String) {
        self.checks.push(AxiomCheck {
            name,
            passed,
            detail,
        });
    }
}

/// A random `d → 8 → 1` tanh network.
pub(crate) fn random_mlp(d: usize, rng: &mut impl Rng) -> Mlp {
    let mut dense = |inputs: usize, outputs: usize, activation| {
        let weights = (0..inputs * outputs).map(|_| rng.random_range(-1.5..1.5)).collect();
        let bias = (0..outputs).map(|_| rng.random_range(-0.5..0.5)).collect();
        Dense {
            inputs,
            outputs,
            weights,
            bias,
            activation,
        }
    };
    let hidden = dense(d, 8, Activation::Tanh);
    let out = dense(8, 1, Activation::Identity);
    Mlp::new(vec![hidden, out], 0).expect("consistent layers")
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs the axiom checks on `n_models` random networks over `d` features.
///
/// `tolerance` bounds the elementwise disagreement allowed for the sign and
/// shift checks. Each check is recorded; nothing is returned as an error
/// unless the estimator itself fails.
pub fn verify_attribution_axioms(
    n_models: usize,
    d: usize,
    cfg: &VarianceGameConfig,
    tolerance: f64,
    master_seed: u64,
) -> Result<AxiomReport> {
    let mut report = AxiomReport::default();
    let mut rng = rng_stream(derive_seed(master_seed, label("axioms/models")), 0);
    let spec = PerturbationSpec::new(vec![1.0; d], 1.0)?;

    for k in 0..n_models {
        let seed = derive_seed(master_seed, k as u64);
        let x = Instance::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let net = random_mlp(d, &mut rng);

        let constant = FnModel::new(d, |_: &[f64]| 5.0);
        let phi0 = varshap_exact(&constant, &x, &spec, cfg, seed)?.phi;
        report.push(
            format!("zero_property[{k}]"),
            phi0.iter().all(|&v| v == 0.0),
            format!("{phi0:?}"),
        );

        let base = varshap_exact(&net, &x, &spec, cfg, seed)?.phi;
        let neg = FnModel::new(d, |z: &[f64]| -net.predict(z).unwrap_or(f64::NAN));
        let phi_neg = varshap_exact(&neg, &x, &spec, cfg, seed)?.phi;
        let diff = max_abs_diff(&base, &phi_neg);
        report.push(
            format!("sign_independence[{k}]"),
            diff <= tolerance,
            format!("max |Φ(Ω) − Φ(−Ω)| = {diff:e}"),
        );

        let shift = rng.random_range(-100.0..100.0);
        let shifted = FnModel::new(d, |z: &[f64]| net.predict(z).unwrap_or(f64::NAN) + shift);
        let phi_shift = varshap_exact(&shifted, &x, &spec, cfg, seed)?.phi;
        let diff = max_abs_diff(&base, &phi_shift);
        report.push(
            format!("shift_invariance[{k}]"),
            diff <= tolerance,
            format!("c = {shift:.3}, max |Φ(Ω + c) − Φ(Ω)| = {diff:e}"),
        );

        let m = cfg.samples_per_coalition.max(1000);
        let (va, vb, vab, se) = additivity_sample(&net, &x, &spec, m, seed)?;
        let gap = (vab - va - vb).abs();
        report.push(
            format!("estimator_additivity[{k}]"),
            gap <= 4.0 * se,
            format!("|Var(A+B) − Var(A) − Var(B)| = {gap:e}, 4·SE = {:e}", 4.0 * se),
        );
    }

    for s in -5..=5 {
        for t in -5..=5 {
            let (s, t) = (f64::from(s) * 0.5, f64::from(t) * 0.5);
            let sq = |v: f64| v * v;
            let lhs = (sq(s + t) + sq(s - t)) / 2.0;
            let rhs = sq(s) + sq(t);
            if lhs != rhs {
                report.push(
                    format!("functional_equation[{s},{t}]"),
                    false,
                    format!("{lhs} != {rhs}"),
                );
            }
        }
    }
    if !report.checks.iter().any(|c| c.name.starts_with("functional_equation")) {
        report.push(
            "functional_equation".into(),
            true,
            "(d(s+t) + d(s−t))/2 = d(s) + d(t) on the half-integer grid [−2.5, 2.5]²".into(),
        );
    }
    Ok(report)
}

/// Sample variances of outputs on two independent streams and of their sum,
/// with the standard error of the sum's cross term.
fn additivity_sample<M: Model + ?Sized>(
    model: &M,
    x: &Instance,
    spec: &PerturbationSpec,
    m: usize,
    seed: u64,
) -> Result<(f64, f64, f64, f64)> {
    let tag = derive_seed(seed, label("axioms/additivity"));
    let empty = Coalition::empty(x.len());
    let outputs = |stream: u64| -> Result<Vec<f64>> {
        let s = sample_perturbed(x, &empty, spec, m, &mut rng_stream(tag, stream))?;
        s.iter_rows().map(|r| model.predict(r)).collect()
    };
    let a = outputs(0)?;
    let b = outputs(1)?;
    let sum: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
    let var = |v: &[f64]| {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        v.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    let (va, vb) = (var(&a), var(&b));
    // Var(A+B) − Var(A) − Var(B) = 2·cov(A, B), whose sd is about 2·sqrt(va·vb/m)
    let se = 2.0 * (va * vb / m as f64).sqrt();
    Ok((va, vb, var(&sum), se))
}
