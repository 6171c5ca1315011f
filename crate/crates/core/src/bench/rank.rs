use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::stats::lower_median;
use crate::metrics::Direction;

use super::ScoreRow;

/// Per-metric ranks of each method and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    /// Methods in first-seen order.
    pub methods: Vec<String>,
    /// Metrics that entered the ranking, in first-seen order.
    pub metrics: Vec<String>,
    /// method → metric → median of unflagged scores.
    pub medians: BTreeMap<String, BTreeMap<String, Option<f64>>>,
    /// method → metric → rank (1 is best, ties averaged).
    pub per_metric_ranks: BTreeMap<String, BTreeMap<String, f64>>,
    /// method → mean rank over `metrics`.
    pub aggregate: BTreeMap<String, f64>,
    /// Metrics dropped because every score was flagged.
    pub excluded_metrics: Vec<String>,
}

impl RankingTable {
    /// Methods sorted by aggregate rank, then name.
    pub fn ordered_methods(&self) -> Vec<&str> {
        let mut m: Vec<&str> = self.methods.iter().map(String::as_str).collect();
        m.sort_by(|a, b| self.aggregate[*a].total_cmp(&self.aggregate[*b]).then(a.cmp(b)));
        m
    }

    pub fn rank(&self, method: &str, metric: &str) -> Option<f64> {
        self.per_metric_ranks.get(method)?.get(metric).copied()
    }
}

/// Ranks of `values` (`None` last), best first per `direction`, ties sharing
/// their average rank.
pub fn rank_values(values: &[Option<f64>], direction: Direction) -> Vec<f64> {
    let key = |v: &Option<f64>| match v {
        Some(x) if !x.is_nan() => Some(match direction {
            Direction::HigherBetter => -x,
            Direction::LowerBetter => *x,
        }),
        _ => None,
    };
    let keys: Vec<Option<f64>> = values.iter().map(key).collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    let cmp = |a: &Option<f64>, b: &Option<f64>| match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    };
    order.sort_by(|&i, &j| cmp(&keys[i], &keys[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && cmp(&keys[order[end]], &keys[order[start]]).is_eq() {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

/// Ranks methods by their per-metric median over all cells.
///
/// `direction` gives each metric's orientation; metrics it does not know are
/// skipped. A method with no unflagged score on a metric ranks last there.
pub fn rank_methods(scores: &[ScoreRow], direction: impl Fn(&str) -> Option<Direction>) -> Result<RankingTable> {
    let mut methods: Vec<String> = Vec::new();
    let mut metrics: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for row in scores {
        if !methods.contains(&row.method) {
            methods.push(row.method.clone());
        }
        if !metrics.contains(&row.metric) {
            metrics.push(row.metric.clone());
        }
        let entry = cells.entry((row.method.as_str(), row.metric.as_str())).or_default();
        if !row.flagged && row.score.is_finite() {
            entry.push(row.score);
        }
    }
    if methods.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "ranking needs at least 2 methods, got {}",
            methods.len()
        )));
    }

    let mut medians: BTreeMap<String, BTreeMap<String, Option<f64>>> = BTreeMap::new();
    let mut ranks: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    for metric in &metrics {
        let Some(dir) = direction(metric) else {
            log::warn!("metric `{metric}` has no known direction; skipped");
            excluded.push(metric.clone());
            continue;
        };
        let med: Vec<Option<f64>> = methods
            .iter()
            .map(|m| cells.get(&(m.as_str(), metric.as_str())).and_then(|v| lower_median(v)))
            .collect();
        for (m, v) in methods.iter().zip(&med) {
            medians.entry(m.clone()).or_default().insert(metric.clone(), *v);
        }
        if med.iter().all(Option::is_none) {
            log::warn!("metric `{metric}` has only flagged scores; excluded from ranking");
            excluded.push(metric.clone());
            continue;
        }
        for (m, r) in methods.iter().zip(rank_values(&med, dir)) {
            ranks.entry(m.clone()).or_default().insert(metric.clone(), r);
        }
        used.push(metric.clone());
    }
    if used.is_empty() {
        return Err(Error::Degenerate("no metric has an unflagged score".into()));
    }
    let aggregate = methods
        .iter()
        .map(|m| {
            let r = &ranks[m];
            (m.clone(), used.iter().map(|k| r[k]).sum::<f64>() / used.len() as f64)
        })
        .collect();
    Ok(RankingTable {
        methods,
        metrics: used,
        medians,
        per_metric_ranks: ranks,
        aggregate,
        excluded_metrics: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, metric: &str, instance: usize, score: f64) -> ScoreRow {
        ScoreRow {
            method: method.into(),
            model: "m".into(),
            dataset: "d".into(),
            instance_index: instance,
            metric: metric.into(),
            score,
            flagged: false,
        }
    }

    fn higher(_: &str) -> Option<Direction> {
        Some(Direction::HigherBetter)
    }

    #[test]
    fn by_hand_ranks() {
        let r = rank_values(&[Some(0.9), Some(0.5), Some(0.7)], Direction::HigherBetter);
        assert_eq!(r, vec![1.0, 3.0, 2.0]);
        let r = rank_values(&[Some(0.9), Some(0.5), Some(0.7)], Direction::LowerBetter);
        assert_eq!(r, vec![3.0, 1.0, 2.0]);
        let r = rank_values(&[Some(1.0), Some(1.0), None, Some(0.0)], Direction::HigherBetter);
        assert_eq!(r, vec![1.5, 1.5, 4.0, 3.0]);
        let r = rank_values(&[None, Some(2.0), None], Direction::LowerBetter);
        assert_eq!(r, vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn dominant_method() {
        let mut rows = Vec::new();
        for k in 0..9 {
            rows.push(row("A", &format!("m{k}"), 0, 1.0));
            rows.push(row("B", &format!("m{k}"), 0, 0.0));
        }
        let t = rank_methods(&rows, higher).unwrap();
        assert_eq!(t.aggregate["A"], 1.0);
        assert_eq!(t.aggregate["B"], 2.0);
        assert_eq!(t.ordered_methods(), vec!["A", "B"]);
    }

    #[test]
    fn ties_average() {
        let rows = vec![row("A", "m", 0, 0.5), row("B", "m", 0, 0.5)];
        let t = rank_methods(&rows, higher).unwrap();
        assert_eq!(t.rank("A", "m"), Some(1.5));
        assert_eq!(t.rank("B", "m"), Some(1.5));
    }

    #[test]
    fn median_over_cells_and_flagged_excluded() {
        let mut rows = vec![
            row("A", "m", 0, 0.1),
            row("A", "m", 1, 0.9),
            row("A", "m", 2, 0.5),
            row("B", "m", 0, 0.6),
            row("B", "x", 0, 0.6),
            row("A", "x", 0, 0.6),
        ];
        rows[1].flagged = true;
        let t = rank_methods(&rows, higher).unwrap();
        // A's valid scores (0.1, 0.5): lower median 0.1
        assert_eq!(t.medians["A"]["m"], Some(0.1));
        assert_eq!(t.rank("B", "m"), Some(1.0));
        let mut all_flagged = rows.clone();
        for r in all_flagged.iter_mut().filter(|r| r.metric == "x") {
            r.flagged = true;
        }
        let t = rank_methods(&all_flagged, higher).unwrap();
        assert_eq!(t.excluded_metrics, vec!["x".to_string()]);
        assert_eq!(t.metrics, vec!["m".to_string()]);
    }

    #[test]
    fn permutation_sum_and_monotone_invariance() {
        let scores = [0.3, -1.0, 2.5, 0.3, 7.0];
        let mut rows: Vec<ScoreRow> = scores.iter().enumerate().map(|(i, s)| row(&format!("M{i}"), "m", 0, *s)).collect();
        let t = rank_methods(&rows, higher).unwrap();
        let sum: f64 = t.per_metric_ranks.values().map(|r| r["m"]).sum();
        assert_eq!(sum, 15.0);
        for r in rows.iter_mut() {
            r.score = r.score.exp() * 3.0 + 1.0;
        }
        let t2 = rank_methods(&rows, higher).unwrap();
        assert_eq!(t.per_metric_ranks, t2.per_metric_ranks);
    }

    #[test]
    fn single_method_rejected() {
        assert!(rank_methods(&[row("A", "m", 0, 1.0)], higher).is_err());
    }
}
