//! Method × model × dataset × instance × metric score grids and rankings.

mod methods;
pub mod rank;
pub mod report;
pub mod svg;

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_dataset, Dataset, Instance, Normalization};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, Direction, MetricConfig, MetricInput, MetricSpec};
use crate::model::{load_model, Model, NormalizedModel};
use crate::perturb::estimate_feature_stats;
use crate::rng::{derive_seed, label};
use crate::synth::{self, TRAIN_FRACTION};

pub use methods::{ExplainContext, ExplainSettings, MethodPreset};
pub use rank::{rank_methods, rank_values, RankingTable};
pub use report::{emit_report, load_ranking, ranking_csv, read_scores_csv, scores_csv, ReportFormat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub methods: Vec<MethodPreset>,
    /// `gtm:dataset1`..`gtm:dataset3` or a JSON model file.
    pub models: Vec<String>,
    /// `synth:1`..`synth:3` or a CSV file.
    pub datasets: Vec<String>,
    /// Target column dropped from CSV datasets, if present in the header.
    pub target_column: Option<String>,
    pub n_instances: usize,
    pub master_seed: u64,
    pub metric_cfg: MetricConfig,
    /// Also score faithfulness with the black baseline (`<metric>_black`).
    pub both_baselines: bool,
    pub settings: ExplainSettings,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            methods: MethodPreset::defaults(),
            models: vec!["gtm:dataset1".into(), "gtm:dataset2".into(), "gtm:dataset3".into()],
            datasets: vec!["synth:1".into(), "synth:2".into(), "synth:3".into()],
            target_column: Some("Y".into()),
            n_instances: 50,
            master_seed: 0,
            metric_cfg: MetricConfig::default(),
            both_baselines: false,
            settings: ExplainSettings::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_instances == 0 {
            return Err(Error::InvalidInput("n_instances must be >= 1".into()));
        }
        if self.methods.is_empty() || self.models.is_empty() || self.datasets.is_empty() {
            return Err(Error::InvalidInput("methods, models and datasets must be non-empty".into()));
        }
        for (i, a) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(a) {
                return Err(Error::InvalidInput(format!("duplicate method preset {a}")));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: BenchmarkConfig = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn metric_suite(&self) -> Vec<MetricSpec> {
        MetricSpec::suite(self.both_baselines)
    }
}

/// One score of the raw table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub method: String,
    pub model: String,
    pub dataset: String,
    pub instance_index: usize,
    pub metric: String,
    pub score: f64,
    pub flagged: bool,
}

fn sort_key(r: &ScoreRow) -> (&str, &str, &str, usize, &str) {
    (&r.method, &r.model, &r.dataset, r.instance_index, &r.metric)
}

/// Direction of a metric column name, `_black` variants included.
pub fn metric_direction(name: &str) -> Option<Direction> {
    MetricSpec::parse(name).map(|s| s.direction())
}

/// Ranks the methods of a score table with the built-in direction table.
pub fn rank_scores(rows: &[ScoreRow]) -> Result<RankingTable> {
    rank_methods(rows, metric_direction)
}

/// An explainer the benchmark can run; implemented by [`MethodPreset`].
pub trait MethodRunner: Send + Sync {
    fn name(&self) -> String;
    fn run(&self, ctx: &ExplainContext<'_>, x: &Instance, seed: u64) -> Result<Vec<f64>>;
}

impl MethodRunner for MethodPreset {
    fn name(&self) -> String {
        MethodPreset::name(self)
    }

    fn run(&self, ctx: &ExplainContext<'_>, x: &Instance, seed: u64) -> Result<Vec<f64>> {
        Ok(ctx.explain(self, x, seed)?.phi)
    }
}

/// A model paired with a dataset it accepts, in normalized feature space.
pub struct Cell {
    pub model_name: String,
    pub dataset_name: String,
    pub model: Box<dyn Model>,
    pub train: Dataset,
    pub test: Dataset,
    /// Row offset of `test` in the full dataset.
    pub test_offset: usize,
}

enum ModelSource {
    Gtm(synth::Gtm),
    File(Arc<dyn Model>),
}

struct LoadedDataset {
    name: String,
    data: Dataset,
    normalization: Normalization,
    split: usize,
}

fn file_stem(spec: &str) -> String {
    Path::new(spec)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| spec.to_string())
}

fn load_model_spec(spec: &str) -> Result<(String, ModelSource)> {
    match spec.strip_prefix("gtm:") {
        Some(name) => Ok((format!("gtm_{name}"), ModelSource::Gtm(synth::gtm(name)?))),
        None => Ok((file_stem(spec), ModelSource::File(Arc::from(load_model(spec)?)))),
    }
}

fn load_dataset_spec(spec: &str, target: Option<&str>, seed: u64) -> Result<LoadedDataset> {
    if let Some(k) = spec.strip_prefix("synth:") {
        let k: u32 = k
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad synthetic dataset `{spec}`")))?;
        let ds = synth::gen_dataset(k, derive_seed(seed, label("bench/synth")))?;
        let split = ds.split();
        return Ok(LoadedDataset {
            name: format!("dataset{k}"),
            data: ds.data,
            normalization: ds.normalization,
            split,
        });
    }
    let path = Path::new(spec);
    let header = {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
        r.headers().map_err(|e| Error::parse(path, e))?.clone()
    };
    let target = target.filter(|t| header.iter().any(|h| h.trim() == *t));
    let raw = load_dataset(path, target)?;
    let split = raw.split_index(TRAIN_FRACTION);
    let normalization = Normalization::fit(&raw, split)?;
    let data = raw.normalized(&normalization)?;
    Ok(LoadedDataset {
        name: file_stem(spec),
        data,
        normalization,
        split,
    })
}

/// Loads every model and dataset and pairs those whose arities agree.
///
/// Ground-truth models are wrapped to read normalized rows; model files are
/// assumed to take normalized features already.
pub fn build_cells(cfg: &BenchmarkConfig) -> Result<Vec<Cell>> {
    let models = cfg
        .models
        .iter()
        .map(|s| load_model_spec(s))
        .collect::<Result<Vec<_>>>()?;
    let datasets = cfg
        .datasets
        .iter()
        .map(|s| load_dataset_spec(s, cfg.target_column.as_deref(), cfg.master_seed))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for (model_name, source) in &models {
        for ds in &datasets {
            let arity = match source {
                ModelSource::Gtm(g) => g.arity(),
                ModelSource::File(m) => m.arity(),
            };
            if arity != ds.data.n_features() {
                continue;
            }
            let model: Box<dyn Model> = match source {
                ModelSource::Gtm(g) => Box::new(NormalizedModel::new(*g, ds.normalization.clone())?),
                ModelSource::File(m) => Box::new(Arc::clone(m)),
            };
            cells.push(Cell {
                model_name: model_name.clone(),
                dataset_name: ds.name.clone(),
                model,
                train: ds.data.slice_rows(0..ds.split)?,
                test: ds.data.slice_rows(ds.split..ds.data.n_rows())?,
                test_offset: ds.split,
            });
        }
    }
    if cells.is_empty() {
        return Err(Error::InvalidInput("no model accepts any dataset (arity mismatch)".into()));
    }
    Ok(cells)
}

/// `n` row indices spread evenly over `0..len`.
pub fn stride_indices(len: usize, n: usize) -> Vec<usize> {
    let n = n.min(len);
    (0..n).map(|i| i * len / n).collect()
}

/// Seed for explaining test row `index` of a cell; shared by all methods.
pub fn explain_seed(master: u64, model: &str, dataset: &str, index: usize) -> u64 {
    derive_seed(master, label(&format!("{model}|{dataset}|{index}")))
}

/// Runs the default presets over `cfg`.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<ScoreRow>> {
    let runners: Vec<&dyn MethodRunner> = cfg.methods.iter().map(|m| m as &dyn MethodRunner).collect();
    run_benchmark_with(cfg, &runners)
}

/// Runs `methods` (instead of `cfg.methods`) over the models and datasets of
/// `cfg`. Rows come back sorted by method, model, dataset, instance, metric.
pub fn run_benchmark_with(cfg: &BenchmarkConfig, methods: &[&dyn MethodRunner]) -> Result<Vec<ScoreRow>> {
    cfg.validate()?;
    let cells = build_cells(cfg)?;
    let suite = cfg.metric_suite();

    struct Prepared {
        feature_std: Vec<f64>,
        background: Vec<Vec<f64>>,
        metric_cfg: MetricConfig,
        instances: Vec<(usize, Instance)>,
    }
    let prepared = cells
        .iter()
        .map(|c| {
            let d = c.train.n_features();
            let mut metric_cfg = cfg.metric_cfg.clone().with_ranges(c.train.column_ranges());
            metric_cfg.subset_size = metric_cfg.subset_size.min(d.saturating_sub(1).max(1));
            let instances = stride_indices(c.test.n_rows(), cfg.n_instances)
                .into_iter()
                .map(|i| Ok((c.test_offset + i, Instance::new(c.test.row(i).to_vec())?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(Prepared {
                feature_std: estimate_feature_stats(&c.train)?.into_iter().map(f64::sqrt).collect(),
                background: c.train.rows().map(|r| r.to_vec()).collect(),
                metric_cfg,
                instances,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize, usize)> = (0..methods.len())
        .flat_map(|m| {
            prepared
                .iter()
                .enumerate()
                .flat_map(move |(c, p)| (0..p.instances.len()).map(move |i| (m, c, i)))
        })
        .collect();

    let mut rows: Vec<ScoreRow> = jobs
        .into_par_iter()
        .flat_map_iter(|(m, c, i)| {
            let runner = methods[m];
            let cell = &cells[c];
            let prep = &prepared[c];
            let (index, x) = &prep.instances[i];
            let ctx = ExplainContext {
                model: cell.model.as_ref(),
                feature_std: &prep.feature_std,
                background: &prep.background,
                settings: &cfg.settings,
            };
            let seed = explain_seed(cfg.master_seed, &cell.model_name, &cell.dataset_name, *index);
            let row = |metric: String, score: f64, flagged: bool| ScoreRow {
                method: runner.name(),
                model: cell.model_name.clone(),
                dataset: cell.dataset_name.clone(),
                instance_index: *index,
                metric,
                score,
                flagged,
            };
            match runner.run(&ctx, x, seed) {
                Err(e) => {
                    log::warn!("{} on {}/{} row {index}: {e}", runner.name(), cell.model_name, cell.dataset_name);
                    suite.iter().map(|s| row(s.name(), f64::NAN, true)).collect::<Vec<_>>()
                }
                Ok(phi) => {
                    let explainer = |z: &Instance, s: u64| runner.run(&ctx, z, s);
                    let input = MetricInput {
                        model: cell.model.as_ref(),
                        explainer: &explainer,
                        x,
                        phi: &phi,
                        explain_seed: seed,
                    };
                    let metric_seed = derive_seed(seed, label("bench/metrics"));
                    suite
                        .iter()
                        .map(|s| match evaluate(*s, &input, &prep.metric_cfg, metric_seed) {
                            Ok(score) => row(s.name(), score.value, score.flagged),
                            Err(e) => {
                                log::warn!("{} for {} at row {index}: {e}", s.name(), runner.name());
                                row(s.name(), f64::NAN, true)
                            }
                        })
                        .collect()
                }
            }
        })
        .collect();
    rows.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)));
    Ok(rows)
}
