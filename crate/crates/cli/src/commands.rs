use std::path::Path;

use varshap::baselines::BackgroundMode;
use varshap::bench::svg::{bar_chart, grouped_bar_chart};
use varshap::bench::{emit_report, rank_scores, scores_csv, BenchmarkConfig, ReportFormat};
use varshap::data::{write_atomic, write_dataset};
use varshap::metrics::{evaluate, MetricConfig, MetricInput, MetricReport, MetricScore, MetricSpec, PerturbBaseline};
use varshap::rng::{derive_seed, label};
use varshap::synth::{gen_dataset, SynthDataset};
use varshap::varshap::SignConvention;
use varshap::{load_attribution, Attribution, Instance};

use crate::inputs::{self, ensure_dir, Source};
use crate::recipe::{default_budget, Env, Recipe, EXACT_UP_TO};
use crate::{
    BenchArgs, Background, Baseline, CaseArgs, CliError, ExplainArgs, GenArgs, Method, MetricsArgs, ModelArgs, Sign,
};

const SEED_VAR: &str = "VARSHAP_SEED";

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_VAR}={v:?} is not an unsigned 64-bit integer"))),
        Err(_) => Ok(None),
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    Ok(flag.or(env_seed()?).unwrap_or(0))
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| CliError::Usage(format!("cannot write output: {e}")))
}

fn csv_text(records: Vec<Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.write_record(&r).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Usage(e.to_string()))
}

fn source<'a>(m: &'a ModelArgs, seed: u64) -> Source<'a> {
    Source {
        model: m.model.as_deref(),
        gtm: m.gtm.as_deref(),
        data: m.data.as_deref(),
        target: &m.target,
        normalize: !m.no_normalize,
        seed,
    }
}

fn explain_recipe(a: &ExplainArgs, d: usize) -> Result<Recipe, CliError> {
    let budget = |default: Option<usize>| -> Result<Option<usize>, CliError> {
        match a.coalitions {
            Some(n) if n < d + 2 => Err(CliError::Usage(format!("--coalitions must be >= d + 2 = {}, got {n}", d + 2))),
            Some(n) => Ok(Some(n)),
            None => Ok(default),
        }
    };
    let enumerate = d <= EXACT_UP_TO;
    match a.method {
        Method::Varshap => {
            let samples = a.samples.unwrap_or(4096);
            if samples < 2 {
                return Err(CliError::Usage(format!("--samples must be >= 2, got {samples}")));
            }
            Ok(Recipe::Varshap {
                sigma: a.sigma.unwrap_or(0.6),
                samples,
                paired: !a.unpaired,
                sign: match a.sign {
                    Sign::ReductionPositive => SignConvention::ReductionPositive,
                    Sign::IncreasePositive => SignConvention::IncreasePositive,
                },
                coalitions: budget(if enumerate { None } else { Some(default_budget(d)) })?,
            })
        }
        Method::Kernelshap => {
            if a.n_background == 0 {
                return Err(CliError::Usage("--n-background must be >= 1".into()));
            }
            let all = if enumerate { 1usize << d } else { default_budget(d) };
            Ok(Recipe::Kernelshap {
                background: match a.background {
                    Background::Zero => BackgroundMode::ZeroBaseline,
                    Background::Data => BackgroundMode::DataSampling,
                },
                n_background: a.n_background,
                coalitions: budget(Some(all))?.unwrap_or(all),
            })
        }
        Method::Lime => {
            let samples = a.samples.unwrap_or(1000);
            if samples < d + 2 {
                return Err(CliError::Usage(format!("--samples must be >= d + 2 = {}, got {samples}", d + 2)));
            }
            Ok(Recipe::Lime {
                sparsity: a.sparsity,
                kernel_width: a.kernel_width,
                samples,
                sigma: a.sigma.unwrap_or(1.0),
            })
        }
    }
}

pub fn explain(a: ExplainArgs) -> Result<(), CliError> {
    let seed = resolve_seed(a.seed)?;
    let inputs = inputs::load(&source(&a.source, seed))?;
    let x = match (&a.instance, a.instance_index) {
        (Some(v), _) => inputs.instance_from_raw(&v.0, "--instance")?,
        (None, Some(i)) => inputs.instance_from_row(i)?,
        (None, None) => return Err(CliError::Usage("--instance or --instance-index is required".into())),
    };
    let recipe = explain_recipe(&a, x.len())?;
    let env = Env {
        model: inputs.model.as_ref(),
        feature_std: &inputs.feature_std,
        background: &inputs.background,
    };
    let attribution = recipe
        .run(&env, &x, seed)?
        .with_param("instance", x.to_vec())
        .with_param("feature_names", inputs.feature_names.clone());
    let mut json = attribution.to_json()?;
    json.push('\n');
    match &a.output {
        Some(path) => write_out(path, json.as_bytes())?,
        None => print!("{json}"),
    }
    if let Some(path) = &a.svg {
        let bars = inputs.feature_names.iter().cloned().zip(attribution.phi.iter().copied()).collect::<Vec<_>>();
        write_out(path, bar_chart(&format!("{} attribution", attribution.method), &bars).as_bytes())?;
    }
    Ok(())
}

struct CaseRow {
    dataset: String,
    method: String,
    phi: Vec<f64>,
}

fn case_methods(a: &CaseArgs, ds: &SynthDataset, x: &Instance, seed: u64) -> Result<Vec<CaseRow>, CliError> {
    let model = ds.model();
    let train = ds.train();
    let std: Vec<f64> = varshap::estimate_feature_stats(&train)?.into_iter().map(f64::sqrt).collect();
    let all_rows: Vec<Vec<f64>> = ds.data.rows().map(|r| r.to_vec()).collect();
    let d = x.len();
    let env = Env {
        model: &model,
        feature_std: &std,
        background: &all_rows,
    };
    let recipes = [
        Recipe::Varshap {
            sigma: a.sigma,
            samples: 100_000,
            paired: true,
            sign: SignConvention::ReductionPositive,
            coalitions: None,
        },
        Recipe::Kernelshap {
            background: BackgroundMode::DataSampling,
            n_background: all_rows.len(),
            coalitions: 1 << d,
        },
        Recipe::Lime {
            sparsity: a.sparsity,
            kernel_width: None,
            samples: 1000,
            sigma: 1.0,
        },
    ];
    recipes
        .iter()
        .map(|r| {
            let att: Attribution = r.run(&env, x, seed)?;
            Ok(CaseRow {
                dataset: ds.kind.name().to_string(),
                method: att.method.clone(),
                phi: att.phi,
            })
        })
        .collect()
}

pub fn casestudy(a: CaseArgs) -> Result<(), CliError> {
    let seed = resolve_seed(a.seed)?;
    let (datasets, default_point): (Vec<u32>, Vec<f64>) = match a.case {
        1 => (vec![1, 2], vec![0.0, 0.0]),
        _ => (vec![3], vec![0.3, -0.2, 0.8]),
    };
    let point = a.point.as_ref().map(|p| p.0.clone()).unwrap_or(default_point);
    let mut rows = Vec::new();
    let mut names = Vec::new();
    for k in datasets {
        let ds = gen_dataset(k, seed)?;
        if point.len() != ds.raw.n_features() {
            return Err(CliError::Usage(format!(
                "--point: expected {} values, got {}",
                ds.raw.n_features(),
                point.len()
            )));
        }
        names = ds.raw.feature_names().to_vec();
        let x = Instance::new(ds.normalization.normalize(&point))?;
        rows.extend(case_methods(&a, &ds, &x, seed)?);
    }

    let mut records = vec![vec!["dataset".into(), "method".into(), "feature".into(), "phi".into()]];
    for r in &rows {
        for (name, v) in names.iter().zip(&r.phi) {
            records.push(vec![r.dataset.clone(), r.method.clone(), name.clone(), v.to_string()]);
        }
        log::info!("{} {}: {:?}", r.dataset, r.method, r.phi);
    }
    let dir = ensure_dir(&a.output)?;
    let stem = format!("case{}", a.case);
    write_out(&dir.join(format!("{stem}.csv")), csv_text(records)?.as_bytes())?;
    let groups: Vec<(String, Vec<(String, f64)>)> = rows
        .iter()
        .map(|r| {
            let bars = names.iter().cloned().zip(r.phi.iter().copied()).collect();
            (format!("{} {}", r.dataset, r.method), bars)
        })
        .collect();
    let title = format!("Case study {}: attributions at {point:?}", a.case);
    write_out(&dir.join(format!("{stem}.svg")), grouped_bar_chart(&title, &groups).as_bytes())?;
    Ok(())
}

pub fn benchmark(a: BenchArgs) -> Result<(), CliError> {
    let (mut cfg, seed_in_file) = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
            let has_seed = value.get("master_seed").is_some();
            let cfg: BenchmarkConfig = serde_json::from_value(value)
                .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
            (cfg, has_seed)
        }
        None => (BenchmarkConfig::default(), false),
    };
    cfg.master_seed = match a.seed {
        Some(s) => s,
        None if seed_in_file => cfg.master_seed,
        None => env_seed()?.unwrap_or(0),
    };
    if let Some(n) = a.n_instances {
        cfg.n_instances = n as usize;
    }
    cfg.validate().map_err(|e| CliError::Usage(format!("config: {e}")))?;

    let rows = varshap::bench::run_benchmark(&cfg)?;
    let table = rank_scores(&rows)?;
    let dir = ensure_dir(&a.output)?;
    write_out(&dir.join("scores.csv"), scores_csv(&rows)?.as_bytes())?;
    for format in [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Svg] {
        let path = dir.join(format!("ranking.{}", format.extension()));
        emit_report(&table, format, &path).map_err(|e| CliError::Usage(format!("cannot write output: {e}")))?;
    }
    for m in table.ordered_methods() {
        println!("{:>8.3}  {m}", table.aggregate[m]);
    }
    Ok(())
}

pub fn metrics(a: MetricsArgs) -> Result<(), CliError> {
    let attribution = load_attribution(&a.attribution).map_err(|e| CliError::Usage(format!("--attribution: {e}")))?;
    let inputs = inputs::load(&source(&a.source, attribution.seed))?;
    let d = inputs.feature_names.len();
    let recorded: Option<Vec<f64>> = attribution
        .params
        .get("instance")
        .and_then(|v| serde_json::from_value(v.clone()).ok());
    let x = match (&a.instance, recorded) {
        (Some(v), _) => inputs.instance_from_raw(&v.0, "--instance")?,
        (None, Some(z)) => Instance::new(z).map_err(|e| CliError::Usage(format!("--attribution: instance: {e}")))?,
        (None, None) => return Err(CliError::Usage("the attribution records no instance; pass --instance".into())),
    };
    if x.len() != d || attribution.dim() != d {
        return Err(CliError::Usage(format!(
            "dimension mismatch: data has {d} features, instance {}, attribution {}",
            x.len(),
            attribution.dim()
        )));
    }
    let recipe = Recipe::from_attribution(&attribution).map_err(|e| CliError::Usage(format!("--attribution: {e}")))?;
    let env = Env {
        model: inputs.model.as_ref(),
        feature_std: &inputs.feature_std,
        background: &inputs.background,
    };
    let explainer = |z: &Instance, s: u64| recipe.run(&env, z, s).map(|r| r.phi);

    let mut cfg = MetricConfig::default().with_ranges(inputs.train.column_ranges());
    cfg.perturb_baseline = match a.baseline {
        Baseline::Uniform => PerturbBaseline::Uniform,
        Baseline::Black => PerturbBaseline::Black,
    };
    if let Some(r) = a.runs {
        cfg.runs = r;
    }
    cfg.subset_size = match a.subset_size {
        Some(s) if s == 0 || s > d => {
            return Err(CliError::Usage(format!("--subset-size must be in 1..={d}, got {s}")));
        }
        Some(s) => s,
        None => cfg.subset_size.min(d.saturating_sub(1).max(1)),
    };
    let seed = a.seed.or(env_seed()?).unwrap_or(attribution.seed);
    let input = MetricInput {
        model: inputs.model.as_ref(),
        explainer: &explainer,
        x: &x,
        phi: &attribution.phi,
        explain_seed: attribution.seed,
    };
    let metric_seed = derive_seed(seed, label("bench/metrics"));
    let mut records = vec![["metric", "score", "flagged", "median", "n_flagged", "direction"]
        .map(String::from)
        .to_vec()];
    for spec in MetricSpec::suite(a.both_baselines) {
        let score = evaluate(spec, &input, &cfg, metric_seed).unwrap_or_else(|e| {
            log::warn!("{}: {e}", spec.name());
            MetricScore::flagged(f64::NAN)
        });
        let report = MetricReport::new(spec.name(), spec.direction(), &[score]);
        records.push(vec![
            report.metric_name.clone(),
            score.value.to_string(),
            score.flagged.to_string(),
            report.median.map(|m| m.to_string()).unwrap_or_default(),
            report.n_flagged.to_string(),
            report.direction.as_str().to_string(),
        ]);
    }
    let text = csv_text(records)?;
    match &a.output {
        Some(path) => write_out(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn gen(a: GenArgs) -> Result<(), CliError> {
    let seed = resolve_seed(a.seed)?;
    let ds = gen_dataset(a.dataset, seed)?;
    let data = if a.normalized { &ds.data } else { &ds.raw };
    let mut bytes = Vec::new();
    write_dataset(data, &mut bytes)?;
    write_out(&a.write, &bytes)
}
