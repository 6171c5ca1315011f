use super::{MetricConfig, MetricScore};

/// Gini index of the sorted magnitudes: 0 for a flat vector, `1 − 1/d` for
/// a one-hot one. Flagged when all entries are zero.
pub fn sparseness(phi: &[f64]) -> MetricScore {
    let mut mag: Vec<f64> = phi.iter().map(|v| v.abs()).collect();
    let total: f64 = mag.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return MetricScore::flagged(f64::NAN);
    }
    mag.sort_by(f64::total_cmp);
    let d = mag.len() as f64;
    let num: f64 = mag
        .iter()
        .enumerate()
        .map(|(k, v)| (2.0 * (k + 1) as f64 - d - 1.0) * v)
        .sum();
    MetricScore::ok(num / (d * total))
}

/// Shannon entropy (natural log) of `|phi|/Σ|phi|`. Flagged when all
/// entries are zero.
pub fn complexity(phi: &[f64]) -> MetricScore {
    let total: f64 = phi.iter().map(|v| v.abs()).sum();
    if total.is_nan() || total <= 0.0 {
        return MetricScore::flagged(f64::NAN);
    }
    let h = phi
        .iter()
        .map(|v| v.abs() / total)
        .filter(|p| *p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    MetricScore::ok(h)
}

/// Number of entries with `|phiᵢ| > epsilon`.
pub fn effective_complexity(phi: &[f64], cfg: &MetricConfig) -> MetricScore {
    MetricScore::ok(phi.iter().filter(|v| v.abs() > cfg.epsilon).count() as f64)
}
