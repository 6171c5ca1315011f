//! Synthetic case-study datasets and their ground-truth models (GTMs).
//!
//! Datasets 1 and 2 share three Gaussian clusters of patients: A at (0,0)
//! with 1000 rows, B at (4,0) and C at (0,4) with 5000 rows each, all with
//! isotropic spread 0.7. Dataset 1 uses `Y = X1 + 0.2·X2` everywhere;
//! Dataset 2 switches cluster C to `Y = X1 − 0.05·X1·X2`. Dataset 3 has three
//! independent standard normal features and `Y = |X1 + X2|`.
//!
//! Rows are shuffled after generation and z-scored with statistics from the
//! first 80% (the training split). GTMs are defined on raw features; wrap
//! them in [`NormalizedModel`] to evaluate on normalized rows.

use std::fmt;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Normalization};
use crate::error::{Error, Result};
use crate::model::{check_arity, Model, NormalizedModel};
use crate::rng::{derive_seed, label, rng_stream};

pub const TRAIN_FRACTION: f64 = 0.8;
pub const CLUSTER_STD: f64 = 0.7;
pub const DATASET3_ROWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cluster {
    A,
    B,
    C,
}

impl Cluster {
    pub const ALL: [Cluster; 3] = [Cluster::A, Cluster::B, Cluster::C];

    pub fn name(self) -> &'static str {
        match self {
            Cluster::A => "A",
            Cluster::B => "B",
            Cluster::C => "C",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    pub label: Cluster,
    pub center: [f64; 2],
    pub std: f64,
    pub n: usize,
}

pub fn cluster_specs() -> [ClusterSpec; 3] {
    [
        ClusterSpec {
            label: Cluster::A,
            center: [0.0, 0.0],
            std: CLUSTER_STD,
            n: 1000,
        },
        ClusterSpec {
            label: Cluster::B,
            center: [4.0, 0.0],
            std: CLUSTER_STD,
            n: 5000,
        },
        ClusterSpec {
            label: Cluster::C,
            center: [0.0, 4.0],
            std: CLUSTER_STD,
            n: 5000,
        },
    ]
}

/// Cluster whose centre is nearest to `x` (first wins on ties).
pub fn nearest_cluster(x: &[f64]) -> Cluster {
    let mut best = (Cluster::A, f64::INFINITY);
    for c in cluster_specs() {
        let d2 = (x[0] - c.center[0]).powi(2) + (x[1] - c.center[1]).powi(2);
        if d2 < best.1 {
            best = (c.label, d2);
        }
    }
    best.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GtmKind {
    Dataset1,
    Dataset2,
    Dataset3,
}

impl GtmKind {
    pub fn name(self) -> &'static str {
        match self {
            GtmKind::Dataset1 => "dataset1",
            GtmKind::Dataset2 => "dataset2",
            GtmKind::Dataset3 => "dataset3",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            GtmKind::Dataset3 => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for GtmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn formula1(x: &[f64]) -> f64 {
    x[0] + 0.2 * x[1]
}

fn formula2_c(x: &[f64]) -> f64 {
    x[0] - 0.05 * x[0] * x[1]
}

/// A ground-truth model on raw (unnormalized) features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gtm {
    kind: GtmKind,
}

impl Gtm {
    pub fn new(kind: GtmKind) -> Self {
        Gtm { kind }
    }

    pub fn kind(&self) -> GtmKind {
        self.kind
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self.kind {
            GtmKind::Dataset1 => formula1(x),
            GtmKind::Dataset2 => match nearest_cluster(x) {
                Cluster::C => formula2_c(x),
                _ => formula1(x),
            },
            GtmKind::Dataset3 => (x[0] + x[1]).abs(),
        }
    }
}

impl Model for Gtm {
    fn arity(&self) -> usize {
        self.kind.arity()
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        check_arity(self.arity(), x)?;
        Ok(self.eval(x))
    }
}

/// Looks up a GTM by name (`dataset1`, `dataset2` or `dataset3`).
pub fn gtm(name: &str) -> Result<Gtm> {
    let kind = match name {
        "dataset1" => GtmKind::Dataset1,
        "dataset2" => GtmKind::Dataset2,
        "dataset3" => GtmKind::Dataset3,
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown ground-truth model {other:?}; expected dataset1, dataset2 or dataset3"
            )))
        }
    };
    Ok(Gtm::new(kind))
}

/// A generated dataset in raw and normalized form.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub kind: GtmKind,
    /// Raw features, target and group labels.
    pub raw: Dataset,
    /// Z-scored features; target and groups carried over unchanged.
    pub data: Dataset,
    pub normalization: Normalization,
}

impl SynthDataset {
    /// Ground-truth model evaluated on normalized rows.
    pub fn model(&self) -> NormalizedModel<Gtm> {
        NormalizedModel::new(Gtm::new(self.kind), self.normalization.clone()).expect("matching arity")
    }

    /// Index of the first test row.
    pub fn split(&self) -> usize {
        self.data.split_index(TRAIN_FRACTION)
    }

    pub fn train(&self) -> Dataset {
        self.data.slice_rows(0..self.split()).expect("non-empty split")
    }

    pub fn test(&self) -> Dataset {
        self.data.slice_rows(self.split()..self.data.n_rows()).expect("non-empty split")
    }
}

struct ClusterRows {
    x: Vec<[f64; 2]>,
    groups: Vec<Cluster>,
}

fn cluster_rows(seed: u64) -> ClusterRows {
    let specs = cluster_specs();
    let mut x = Vec::new();
    let mut groups = Vec::new();
    for (k, spec) in specs.iter().enumerate() {
        let mut rng = rng_stream(derive_seed(seed, label("synth/clusters")), k as u64);
        for _ in 0..spec.n {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            x.push([spec.center[0] + spec.std * a, spec.center[1] + spec.std * b]);
            groups.push(spec.label);
        }
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.shuffle(&mut rng_stream(derive_seed(seed, label("synth/shuffle")), 0));
    ClusterRows {
        x: order.iter().map(|&i| x[i]).collect(),
        groups: order.iter().map(|&i| groups[i]).collect(),
    }
}

fn finish(kind: GtmKind, rows: Vec<Vec<f64>>, target: Vec<f64>, groups: Option<Vec<String>>) -> Result<SynthDataset> {
    let names = (1..=rows[0].len()).map(|i| format!("X{i}")).collect();
    let mut raw = Dataset::new(rows, names)?.with_target("Y", target)?;
    if let Some(g) = groups {
        raw = raw.with_groups(g)?;
    }
    let normalization = Normalization::fit(&raw, raw.split_index(TRAIN_FRACTION))?;
    let data = raw.normalized(&normalization)?;
    Ok(SynthDataset {
        kind,
        raw,
        data,
        normalization,
    })
}

fn clustered(kind: GtmKind, seed: u64) -> Result<SynthDataset> {
    let c = cluster_rows(seed);
    let target = c
        .x
        .iter()
        .zip(&c.groups)
        .map(|(x, g)| match (kind, g) {
            (GtmKind::Dataset2, Cluster::C) => formula2_c(x),
            _ => formula1(x),
        })
        .collect();
    let groups = c.groups.iter().map(|g| g.name().to_string()).collect();
    let rows = c.x.iter().map(|x| x.to_vec()).collect();
    finish(kind, rows, target, Some(groups))
}

/// Three clusters, `Y = X1 + 0.2·X2` in every group.
pub fn gen_dataset1(seed: u64) -> Result<SynthDataset> {
    clustered(GtmKind::Dataset1, seed)
}

/// Same features as [`gen_dataset1`] for the same seed; cluster C follows
/// `Y = X1 − 0.05·X1·X2`.
pub fn gen_dataset2(seed: u64) -> Result<SynthDataset> {
    clustered(GtmKind::Dataset2, seed)
}

/// Three independent standard normal features, `Y = |X1 + X2|`.
pub fn gen_dataset3(seed: u64) -> Result<SynthDataset> {
    let mut rng = rng_stream(derive_seed(seed, label("synth/dataset3")), 0);
    let rows: Vec<Vec<f64>> = (0..DATASET3_ROWS)
        .map(|_| (0..3).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let target = rows.iter().map(|r| (r[0] + r[1]).abs()).collect();
    finish(GtmKind::Dataset3, rows, target, None)
}

/// Dataset `k` (1, 2 or 3).
pub fn gen_dataset(k: u32, seed: u64) -> Result<SynthDataset> {
    match k {
        1 => gen_dataset1(seed),
        2 => gen_dataset2(seed),
        3 => gen_dataset3(seed),
        other => Err(Error::InvalidInput(format!("no synthetic dataset {other}; expected 1, 2 or 3"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target(ds: &Dataset) -> &[f64] {
        ds.target.as_deref().unwrap()
    }

    #[test]
    fn dataset1_identity_and_sizes() {
        let ds = gen_dataset1(3).unwrap();
        assert_eq!(ds.raw.n_rows(), 11_000);
        for (row, y) in ds.raw.rows().zip(target(&ds.raw)) {
            assert_eq!(y - (row[0] + 0.2 * row[1]), 0.0);
        }
        let groups = ds.raw.group_labels.as_ref().unwrap();
        let count = |g: &str| groups.iter().filter(|l| l.as_str() == g).count();
        assert_eq!((count("A"), count("B"), count("C")), (1000, 5000, 5000));
    }

    #[test]
    fn cluster_a_mean_near_center() {
        let ds = gen_dataset1(11).unwrap();
        let groups = ds.raw.group_labels.as_ref().unwrap();
        let rows: Vec<&[f64]> = ds.raw.rows().zip(groups).filter(|(_, g)| g.as_str() == "A").map(|(r, _)| r).collect();
        let bound = 4.0 * CLUSTER_STD / (rows.len() as f64).sqrt();
        for j in 0..2 {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64;
            assert!(mean.abs() < bound, "{mean}");
        }
    }

    #[test]
    fn dataset2_couples_with_dataset1() {
        let d1 = gen_dataset1(5).unwrap();
        let d2 = gen_dataset2(5).unwrap();
        assert_eq!(d1.raw.as_flat(), d2.raw.as_flat());
        assert_eq!(d1.normalization, d2.normalization);
        let groups = d1.raw.group_labels.as_ref().unwrap();
        let mut differing = 0;
        for ((y1, y2), g) in target(&d1.raw).iter().zip(target(&d2.raw)).zip(groups) {
            if g != "C" {
                assert_eq!(y1, y2);
            } else if y1 != y2 {
                differing += 1;
            }
        }
        assert!(differing > 4900);
    }

    #[test]
    fn formulas_by_hand() {
        assert_eq!(formula1(&[1.0, 1.0]), 1.2);
        assert_eq!(formula2_c(&[1.0, 1.0]), 0.95);
        assert_eq!(formula2_c(&[0.0, 7.0]), 0.0);
    }

    #[test]
    fn dataset3_properties() {
        let ds = gen_dataset3(7).unwrap();
        assert_eq!(ds.raw.n_rows(), DATASET3_ROWS);
        let y = target(&ds.raw);
        assert!(y.iter().all(|&v| v >= 0.0));
        let x3 = ds.raw.column(2);
        let n = y.len() as f64;
        let (mx, my) = (x3.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let cov: f64 = x3.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x3.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        assert!((cov / (vx * vy).sqrt()).abs() < 0.03);
    }

    #[test]
    fn seed_determinism() {
        for k in 1..=3 {
            let a = gen_dataset(k, 99).unwrap();
            let b = gen_dataset(k, 99).unwrap();
            let bits = |d: &Dataset| d.as_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.data), bits(&b.data));
            assert_eq!(a.raw.target, b.raw.target);
        }
        assert!(gen_dataset(4, 0).is_err());
    }

    #[test]
    fn normalization_is_train_only_and_round_trips() {
        let ds = gen_dataset3(1).unwrap();
        let refit = Normalization::fit(&ds.raw, ds.split()).unwrap();
        assert_eq!(refit, ds.normalization);
        for row in ds.raw.rows().take(100) {
            let back = ds.normalization.denormalize(&ds.normalization.normalize(row));
            for (a, b) in back.iter().zip(row) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gtm_examples() {
        assert_eq!(gtm("dataset1").unwrap().predict(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(gtm("dataset3").unwrap().predict(&[3.0, -3.0, 17.0]).unwrap(), 0.0);
        assert!(gtm("dataset4").is_err());
        let (g1, g2) = (gtm("dataset1").unwrap(), gtm("dataset2").unwrap());
        let h = 1e-6;
        for p in [[0.0, 0.0], [h, 0.0], [0.0, h], [-h, -h]] {
            assert_eq!(g1.predict(&p).unwrap(), g2.predict(&p).unwrap());
        }
        assert_eq!(g2.predict(&[1.0, 4.0]).unwrap(), 1.0 - 0.05 * 4.0);
        assert_eq!(g2.predict(&[4.0, 1.0]).unwrap(), 4.0 + 0.2);
    }

    #[test]
    fn normalized_gtm_matches_raw() {
        let ds = gen_dataset2(2).unwrap();
        let m = ds.model();
        let g = Gtm::new(GtmKind::Dataset2);
        for (z, raw) in ds.data.rows().zip(ds.raw.rows()).take(200) {
            assert!((m.predict(z).unwrap() - g.predict(raw).unwrap()).abs() < 1e-9);
        }
    }
}
