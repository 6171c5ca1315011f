//! Shapley-kernel coalition sampling and the efficiency-constrained weighted
//! least-squares fit shared by the sampled VARSHAP estimator and KernelSHAP.
//!
//! Given game values `v(S)`, the fit solves
//!
//! ```text
//! minimize Σ_S w(S) · (v(S) − φ₀ − Σ_{i∈S} φᵢ)²
//! subject to φ₀ = v(∅),  φ₀ + Σᵢ φᵢ = v(F)
//! ```
//!
//! by eliminating the last coefficient. With every coalition present and
//! kernel weights the solution is the exact Shapley value of the game.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// A non-trivial coalition of the regression design and its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCoalition {
    pub coalition: Coalition,
    pub weight: f64,
}

/// `C(n, k)` in floating point; exact while the result fits the mantissa.
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    if acc < 9.0e15 {
        acc.round()
    } else {
        acc
    }
}

/// Total number of coalitions `2^d`, saturating in floating point.
fn coalition_count(d: usize) -> f64 {
    2f64.powi(d as i32)
}

/// Selects the non-trivial coalitions (`∅` and `F` excluded) of the design.
///
/// `budget` counts only those non-trivial coalitions. Whole size classes
/// are enumerated, smallest and largest first, while the budget covers
/// their share of kernel mass; the remaining sizes are sampled in
/// complementary pairs with size probabilities proportional to the
/// Shapley kernel, repeated draws adding to a coalition's weight.
pub fn plan_coalitions(d: usize, budget: usize, rng: &mut RngStream) -> Vec<WeightedCoalition> {
    if d < 2 || budget == 0 {
        return Vec::new();
    }
    let mut out: Vec<WeightedCoalition> = Vec::new();
    let num_sizes = d / 2; // ceil((d-1)/2)
    let num_paired = (d - 1) / 2;
    let mut size_weight: Vec<f64> = (1..=num_sizes)
        .map(|s| (d - 1) as f64 / (s * (d - s)) as f64)
        .collect();
    for w in size_weight.iter_mut().take(num_paired) {
        *w *= 2.0;
    }
    let total: f64 = size_weight.iter().sum();
    size_weight.iter_mut().for_each(|w| *w /= total);

    let mut remaining = size_weight.clone();
    let mut left = budget as f64;
    let mut full_sizes = 0;
    for s in 1..=num_sizes {
        let paired = s <= num_paired;
        let mut nsub = binomial(d, s);
        if paired {
            nsub *= 2.0;
        }
        if left * remaining[s - 1] / nsub < 1.0 - 1e-8 {
            break;
        }
        full_sizes += 1;
        left -= nsub;
        if remaining[s - 1] < 1.0 {
            let scale = 1.0 - remaining[s - 1];
            remaining.iter_mut().for_each(|w| *w /= scale);
        }
        let mut w = size_weight[s - 1] / binomial(d, s);
        if paired {
            w /= 2.0;
        }
        for_each_combination(d, s, |members| {
            let c = Coalition::from_indices(members, d).expect("indices in range");
            out.push(WeightedCoalition {
                coalition: c,
                weight: w,
            });
            if paired {
                out.push(WeightedCoalition {
                    coalition: complement(members, d),
                    weight: w,
                });
            }
        });
    }

    let fixed = out.len();
    let mut samples_left = budget.saturating_sub(fixed);
    if full_sizes == num_sizes || samples_left == 0 {
        return out;
    }

    let mut probs: Vec<f64> = size_weight.clone();
    for p in probs.iter_mut().take(num_paired) {
        *p /= 2.0;
    }
    let probs = &probs[full_sizes..];
    let psum: f64 = probs.iter().sum();
    let cdf: Vec<f64> = probs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p / psum;
            Some(*acc)
        })
        .collect();

    let mut index: HashMap<Coalition, usize> = HashMap::new();
    let mut perm: Vec<usize> = (0..d).collect();
    let max_draws = 4 * samples_left.max(1) + 64;
    for _ in 0..max_draws {
        if samples_left == 0 {
            break;
        }
        let u: f64 = rng.random();
        let k = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
        let s = k + full_sizes + 1;
        // partial Fisher-Yates: first s entries form a uniform s-subset
        for i in 0..s {
            let j = rng.random_range(i..d);
            perm.swap(i, j);
        }
        let members = &perm[..s];
        let mut push = |c: Coalition, out: &mut Vec<WeightedCoalition>, left: &mut usize| {
            if let Some(&pos) = index.get(&c) {
                out[pos].weight += 1.0;
            } else {
                index.insert(c.clone(), out.len());
                out.push(WeightedCoalition {
                    coalition: c,
                    weight: 1.0,
                });
                *left -= 1;
            }
        };
        push(
            Coalition::from_indices(members, d).expect("indices in range"),
            &mut out,
            &mut samples_left,
        );
        if samples_left > 0 && s <= num_paired {
            push(complement(members, d), &mut out, &mut samples_left);
        }
    }

    // sampled rows share the kernel mass not spent on enumerated sizes
    let weight_left: f64 = size_weight[full_sizes..].iter().sum();
    let sampled: f64 = out[fixed..].iter().map(|c| c.weight).sum();
    if sampled > 0.0 {
        for c in &mut out[fixed..] {
            c.weight *= weight_left / sampled;
        }
    }
    out
}

/// True when the plan covers all `2^d − 2` non-trivial coalitions.
pub fn plan_is_complete(d: usize, plan: &[WeightedCoalition]) -> bool {
    plan.len() as f64 == coalition_count(d) - 2.0
}

fn complement(members: &[usize], d: usize) -> Coalition {
    let mut inside = vec![false; d];
    for &i in members {
        inside[i] = true;
    }
    let rest: Vec<usize> = (0..d).filter(|&i| !inside[i]).collect();
    Coalition::from_indices(&rest, d).expect("indices in range")
}

/// Calls `f` with every `k`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Fits `φ₁..φ_d` for the game `v` on the planned coalitions.
///
/// `values[k]` is `v(plan[k].coalition)`. Returns the coefficients in the
/// game's own units, so `Σφ = v_full − v_empty` holds to rounding.
pub fn constrained_wls(
    d: usize,
    plan: &[WeightedCoalition],
    values: &[f64],
    v_empty: f64,
    v_full: f64,
) -> Result<Vec<f64>> {
    assert_eq!(plan.len(), values.len());
    let delta = v_full - v_empty;
    if d == 1 {
        return Ok(vec![delta]);
    }
    let p = d - 1;
    let n = plan.len();
    if n < p {
        return Err(Error::Singular(format!(
            "{} distinct coalitions (with ∅ and F) cannot determine {d} attributions; need at least {}",
            n + 2,
            d + 1
        )));
    }
    let mut a = DMatrix::<f64>::zeros(n, p);
    let mut t = DVector::<f64>::zeros(n);
    for (r, (wc, &v)) in plan.iter().zip(values).enumerate() {
        let z = wc.coalition.indicator();
        let sw = wc.weight.sqrt();
        let zl = if z[d - 1] { 1.0 } else { 0.0 };
        for i in 0..p {
            let zi = if z[i] { 1.0 } else { 0.0 };
            a[(r, i)] = sw * (zi - zl);
        }
        t[r] = sw * (v - v_empty - zl * delta);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-10 * n.max(p) as f64;
    let rank = svd.rank(tol);
    if rank < p {
        return Err(Error::Singular(format!(
            "coalition design has rank {rank}, {p} needed for {d} features; \
             fewer than {} independent coalitions were evaluated",
            d + 1
        )));
    }
    let beta = svd
        .solve(&t, tol)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let mut phi: Vec<f64> = beta.iter().copied().collect();
    let last = delta - phi.iter().sum::<f64>();
    phi.push(last);
    Ok(phi)
}
