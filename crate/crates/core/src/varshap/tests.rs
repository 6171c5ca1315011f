use super::*;
use crate::model::{FnModel, LinearModel};

fn inst(v: &[f64]) -> Instance {
    Instance::new(v.to_vec()).unwrap()
}

fn unit_spec(d: usize) -> PerturbationSpec {
    PerturbationSpec::new(vec![1.0; d], 1.0).unwrap()
}

fn cfg(m: usize) -> VarianceGameConfig {
    VarianceGameConfig::default().with_samples(m)
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn kernel_weight_examples() {
    assert_eq!(shapley_kernel_weight(0, 1).unwrap(), 1.0);
    assert!((shapley_kernel_weight(1, 3).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    assert!(shapley_kernel_weight(3, 3).is_err());
    assert!(shapley_kernel_weight(0, 0).is_err());
}

#[test]
fn kernel_weights_sum_to_one() {
    // sum over S ⊆ F∖{j}: C(k−1, s) coalitions of each size s
    for k in 1..=40usize {
        let total: f64 = (0..k)
            .map(|s| crate::kernel_regression::binomial(k - 1, s) * shapley_kernel_weight(s, k).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12, "k = {k}: {total}");
    }
}

#[test]
fn large_k_uses_log_factorials() {
    let w = shapley_kernel_weight(10, 30).unwrap();
    // 10!·19!/30! = 1/(30·C(29,10))
    let expect = 1.0 / (30.0 * crate::kernel_regression::binomial(29, 10));
    assert!((w / expect - 1.0).abs() < 1e-10);
}

#[test]
fn full_coalition_has_zero_variance() {
    let m = LinearModel::new(vec![1.0, 2.0], 0.0);
    let x = inst(&[0.3, 0.1]);
    let v = variance_given_coalition(&m, &x, &Coalition::full(2), &unit_spec(2), &cfg(100), rng_stream(1, 0))
        .unwrap();
    assert_eq!(v, 0.0);
}

#[test]
fn constant_model_has_zero_variance_everywhere() {
    let m = FnModel::new(3, |_: &[f64]| 5.0);
    let x = inst(&[0.3, 0.1, -2.0]);
    for mask in 0..8 {
        let c = Coalition::from_mask(mask, 3).unwrap();
        let v = variance_given_coalition(&m, &x, &c, &unit_spec(3), &cfg(500), rng_stream(1, mask)).unwrap();
        assert_eq!(v, 0.0);
    }
}

#[test]
fn single_feature_variance() {
    let m = LinearModel::new(vec![1.0, 0.0], 0.0);
    let x = inst(&[0.0, 0.0]);
    let v = variance_given_coalition(&m, &x, &Coalition::empty(2), &unit_spec(2), &cfg(100_000), rng_stream(3, 0))
        .unwrap();
    assert!((v - 1.0).abs() < 0.03, "{v}");
}

#[test]
fn too_few_samples_rejected() {
    let m = LinearModel::new(vec![1.0], 0.0);
    let r = varshap_exact(&m, &inst(&[0.0]), &unit_spec(1), &cfg(1), 0);
    assert!(matches!(r, Err(Error::InvalidInput(_))));
}

#[test]
fn model_errors_name_the_row() {
    let m = FnModel::new(1, |z: &[f64]| if z[0] > 1.0 { f64::NAN } else { z[0] });
    let err = varshap_exact(&m, &inst(&[0.0]), &unit_spec(1), &cfg(1000), 0).unwrap_err();
    assert!(matches!(err, Error::ModelEval { .. }), "{err}");
}

#[test]
fn linear_model_closed_form() {
    let m = LinearModel::new(vec![1.0, 0.2], 0.0);
    let r = varshap_exact_report(&m, &inst(&[0.0, 0.0]), &unit_spec(2), &cfg(100_000), 42).unwrap();
    let phi = &r.attribution.phi;
    for (j, expect) in [1.0, 0.04].into_iter().enumerate() {
        assert!(
            (phi[j] - expect).abs() < 3.0 * r.std_errors[j],
            "phi[{j}] = {}, se = {}",
            phi[j],
            r.std_errors[j]
        );
    }
    let sum: f64 = phi.iter().sum();
    assert!((sum - r.attribution.base_variance).abs() < 1e-12);
}

#[test]
fn increase_positive_negates() {
    let m = LinearModel::new(vec![1.0, 0.2], 0.0);
    let x = inst(&[0.0, 0.0]);
    let pos = varshap_exact(&m, &x, &unit_spec(2), &cfg(2000), 1).unwrap();
    let neg = varshap_exact(&m, &x, &unit_spec(2), &cfg(2000).with_sign(SignConvention::IncreasePositive), 1).unwrap();
    for (a, b) in pos.phi.iter().zip(&neg.phi) {
        assert_eq!(*a, -*b);
    }
    assert_eq!(neg.params["sign_convention"], "increase_positive");
}

#[test]
fn null_player_is_exactly_zero_with_pairing() {
    let m = FnModel::new(3, |z: &[f64]| (z[0] + z[1]).abs());
    let a = varshap_exact(&m, &inst(&[0.2, -0.1, 1.5]), &unit_spec(3), &cfg(5000), 9).unwrap();
    assert_eq!(a.phi[2], 0.0);
    assert!(a.phi[0] > 0.0 && a.phi[1] > 0.0);
}

#[test]
fn symmetric_features_agree() {
    let m = LinearModel::new(vec![1.0, 1.0], 0.0);
    let r = varshap_exact_report(&m, &inst(&[0.5, -0.5]), &unit_spec(2), &cfg(20_000), 5).unwrap();
    let phi = &r.attribution.phi;
    let se = (r.std_errors[0].powi(2) + r.std_errors[1].powi(2)).sqrt();
    assert!((phi[0] - phi[1]).abs() < 4.0 * se);
}

#[test]
fn shift_scale_sign_invariance() {
    let base = |z: &[f64]| (z[0] * z[1]).sin() + z[2] * z[2];
    let x = inst(&[0.4, -1.0, 0.3]);
    let spec = unit_spec(3);
    let c = cfg(3000);
    let run = |f: &(dyn Fn(&[f64]) -> f64 + Sync)| {
        let m = FnModel::new(3, |z: &[f64]| f(z));
        varshap_exact(&m, &x, &spec, &c, 77).unwrap().phi
    };
    let phi = run(&base);
    let shifted = run(&|z| base(z) + 123.0);
    let negated = run(&|z| -base(z));
    let scaled = run(&|z| 3.5 * base(z));
    for j in 0..3 {
        assert!((phi[j] - shifted[j]).abs() < 1e-9);
        assert!((phi[j] - negated[j]).abs() < 1e-9);
        assert!((scaled[j] - 3.5 * 3.5 * phi[j]).abs() <= 1e-9 * scaled[j].abs().max(1e-300));
    }
}

#[test]
fn deterministic_across_worker_counts() {
    let m = FnModel::new(4, |z: &[f64]| z.iter().map(|v| v.tanh()).product::<f64>() + z[0]);
    let x = inst(&[0.1, 0.2, 0.3, 0.4]);
    let spec = unit_spec(4);
    for paired in [true, false] {
        let c = cfg(2000).with_pairing(paired);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let eight = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let a = one.install(|| varshap_exact(&m, &x, &spec, &c, 42).unwrap());
        let b = eight.install(|| varshap_exact(&m, &x, &spec, &c, 42).unwrap());
        let s = varshap_exact(&m, &x, &spec, &VarianceGameConfig { sequential: true, ..c.clone() }, 42).unwrap();
        assert_eq!(bits(&a.phi), bits(&b.phi));
        assert_eq!(bits(&a.phi), bits(&s.phi));
    }
}

#[test]
fn too_many_features_refused() {
    let m = LinearModel::new(vec![1.0; 21], 0.0);
    let r = varshap_exact(&m, &inst(&[0.0; 21]), &unit_spec(21), &cfg(10), 0);
    assert!(matches!(r, Err(Error::TooManyFeatures { features: 21, limit: 20 })));
}

#[test]
fn sampled_with_two_features_equals_exact() {
    let m = FnModel::new(2, |z: &[f64]| z[0] * z[1] + z[0]);
    let x = inst(&[0.3, 0.7]);
    let e = varshap_exact(&m, &x, &unit_spec(2), &cfg(4000), 8).unwrap();
    let s = varshap_sampled(&m, &x, &unit_spec(2), &cfg(4000), 4, 8).unwrap();
    for j in 0..2 {
        assert!((e.phi[j] - s.phi[j]).abs() < 1e-12);
    }
}

#[test]
fn sampled_over_all_coalitions_matches_exact() {
    let d = 6;
    let m = FnModel::new(d, |z: &[f64]| (z[0] * z[1]).tanh() + z[2] * z[3] * z[4] + z[5].abs());
    let x = inst(&[0.1, -0.3, 0.5, 0.2, -0.6, 0.0]);
    let spec = unit_spec(d);
    let e = varshap_exact(&m, &x, &spec, &cfg(3000), 4).unwrap();
    let s = varshap_sampled(&m, &x, &spec, &cfg(3000), 1 << d, 4).unwrap();
    for j in 0..d {
        assert!((e.phi[j] - s.phi[j]).abs() < 1e-6, "{j}: {} vs {}", e.phi[j], s.phi[j]);
    }
}

#[test]
fn sampled_budget_validated() {
    let m = LinearModel::new(vec![1.0; 3], 0.0);
    let r = varshap_sampled(&m, &inst(&[0.0; 3]), &unit_spec(3), &cfg(100), 4, 0);
    assert!(matches!(r, Err(Error::InvalidInput(_))));
}

#[test]
fn sampled_additive_model() {
    // Ω = x₀² + 2x₁ + sin(x₂) + 0·x₃ ... each term's variance is its attribution
    let d = 10;
    let m = FnModel::new(d, |z: &[f64]| z[0] * z[0] + 2.0 * z[1] + z[2].sin() + z[3..].iter().map(|v| 0.5 * v).sum::<f64>());
    let x = inst(&[0.0; 10]);
    let spec = unit_spec(d);
    let r = varshap_sampled_report(&m, &x, &spec, &cfg(20_000), 200, 3).unwrap();
    // Var(X²) = 2, Var(2X) = 4, Var(sin X) = (1 − e^{−2})/2, Var(0.5X) = 0.25 for X ~ N(0,1)
    let mut expect = vec![2.0, 4.0, (1.0 - (-2.0f64).exp()) / 2.0];
    expect.extend(std::iter::repeat(0.25).take(d - 3));
    for j in 0..d {
        let phi = r.attribution.phi[j];
        assert!(
            (phi - expect[j]).abs() < 4.0 * r.std_errors[j] + 1e-9,
            "{j}: {phi} vs {}, se {}",
            expect[j],
            r.std_errors[j]
        );
    }
}

#[test]
fn exact_game_regression_matches_shapley() {
    let m = FnModel::new(5, |z: &[f64]| z[0] * z[1] - z[2].exp() + z[3] * z[4]);
    let r = varshap_exact_report(&m, &inst(&[0.2, 0.1, -0.3, 0.4, 0.0]), &unit_spec(5), &cfg(2000), 6).unwrap();
    let VarianceGame::Exact(game) = &r.game else {
        panic!("exact game expected")
    };
    let reg = game.kernel_regression().unwrap();
    for (a, b) in reg.iter().zip(&r.attribution.phi) {
        assert!((a - b).abs() < 1e-9);
    }
    assert_eq!(game.samples().len(), 32);
}

#[test]
fn axioms_hold_on_random_networks() {
    let report = verify_attribution_axioms(5, 3, &cfg(2000), 1e-9, 11).unwrap();
    let failures: Vec<_> = report.failures().collect();
    assert!(report.all_passed(), "{failures:?}");
    assert!(report.checks.iter().any(|c| c.name == "functional_equation"));
}

#[test]
fn functional_equation_example() {
    let d = |v: f64| v * v;
    assert_eq!((d(2.0 + 3.0) + d(2.0 - 3.0)) / 2.0, 13.0);
    assert_eq!(d(2.0) + d(3.0), 13.0);
}
