use std::path::{Path, PathBuf};

use varshap::data::Dataset;
use varshap::model::NormalizedModel;
use varshap::synth::{self, TRAIN_FRACTION};
use varshap::{estimate_feature_stats, load_dataset, load_model, Instance, Model, Normalization};

use crate::CliError;

/// A model with its data, all in the model's (normalized) feature space.
pub struct Inputs {
    pub model: Box<dyn Model>,
    pub feature_names: Vec<String>,
    /// Raw feature rows as read or generated.
    pub raw: Dataset,
    pub normalization: Normalization,
    pub train: Dataset,
    pub feature_std: Vec<f64>,
    pub background: Vec<Vec<f64>>,
}

impl Inputs {
    pub fn instance_from_raw(&self, raw: &[f64], flag: &str) -> Result<Instance, CliError> {
        let d = self.feature_names.len();
        if raw.len() != d {
            return Err(CliError::Usage(format!("{flag}: expected {d} values, got {}", raw.len())));
        }
        Instance::new(self.normalization.normalize(raw)).map_err(|e| CliError::Usage(format!("{flag}: {e}")))
    }

    pub fn instance_from_row(&self, index: usize) -> Result<Instance, CliError> {
        if index >= self.raw.n_rows() {
            return Err(CliError::Usage(format!(
                "--instance-index {index} out of range for {} rows",
                self.raw.n_rows()
            )));
        }
        self.instance_from_raw(self.raw.row(index), "--instance-index")
    }
}

pub struct Source<'a> {
    pub model: Option<&'a Path>,
    pub gtm: Option<&'a str>,
    pub data: Option<&'a Path>,
    pub target: &'a str,
    pub normalize: bool,
    pub seed: u64,
}

fn gtm_dataset(name: &str) -> Result<u32, CliError> {
    match name {
        "dataset1" => Ok(1),
        "dataset2" => Ok(2),
        "dataset3" => Ok(3),
        other => Err(CliError::Usage(format!(
            "--gtm: unknown ground-truth model `{other}`; expected dataset1, dataset2 or dataset3"
        ))),
    }
}

fn read_csv(path: &Path, target: &str) -> Result<Dataset, CliError> {
    let has_target = csv::Reader::from_path(path)
        .and_then(|mut r| r.headers().map(|h| h.iter().any(|c| c.trim() == target)))
        .map_err(|e| CliError::Usage(format!("--data {}: {e}", path.display())))?;
    load_dataset(path, has_target.then_some(target)).map_err(|e| CliError::Usage(format!("--data: {e}")))
}

pub fn load(src: &Source<'_>) -> Result<Inputs, CliError> {
    let raw = match (src.data, src.gtm) {
        (Some(path), _) => read_csv(path, src.target)?,
        (None, Some(name)) => synth::gen_dataset(gtm_dataset(name)?, src.seed)?.raw,
        (None, None) => return Err(CliError::Usage("--data is required unless --gtm is given".into())),
    };
    let d = raw.n_features();
    let split = raw.split_index(TRAIN_FRACTION);
    let normalization = if src.normalize {
        Normalization::fit(&raw, split).map_err(|e| CliError::Usage(format!("--data: {e}")))?
    } else {
        Normalization::identity(d)
    };
    let model: Box<dyn Model> = match (src.model, src.gtm) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --model or --gtm, not both".into())),
        (Some(path), None) => load_model(path).map_err(|e| CliError::Usage(format!("--model: {e}")))?,
        (None, Some(name)) => {
            gtm_dataset(name)?;
            let g = synth::gtm(name)?;
            if g.arity() != d {
                return Err(CliError::Usage(format!(
                    "--gtm {name} takes {} features but the data has {d}",
                    g.arity()
                )));
            }
            Box::new(NormalizedModel::new(g, normalization.clone())?)
        }
        (None, None) => return Err(CliError::Usage("one of --model or --gtm is required".into())),
    };
    if model.arity() != d {
        return Err(CliError::Usage(format!(
            "the model takes {} features but the data has {d}",
            model.arity()
        )));
    }
    let data = raw.normalized(&normalization)?;
    let train = data.slice_rows(0..split)?;
    let feature_std = estimate_feature_stats(&train)?.into_iter().map(f64::sqrt).collect();
    let background = train.rows().map(|r| r.to_vec()).collect();
    Ok(Inputs {
        model,
        feature_names: raw.feature_names().to_vec(),
        raw,
        normalization,
        train,
        feature_std,
        background,
    })
}

/// Parses `a,b,c` into numbers.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{t}` is not a finite number"))
        })
        .collect()
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectors() {
        assert_eq!(parse_vector("0, 1.5,-2").unwrap(), vec![0.0, 1.5, -2.0]);
        assert!(parse_vector("1,x").is_err());
        assert!(parse_vector("1,inf").is_err());
    }

    #[test]
    fn gtm_without_data_generates() {
        let inputs = load(&Source {
            model: None,
            gtm: Some("dataset3"),
            data: None,
            target: "Y",
            normalize: true,
            seed: 1,
        })
        .unwrap();
        assert_eq!(inputs.feature_names.len(), 3);
        assert_eq!(inputs.raw.n_rows(), 10_000);
        assert!(matches!(inputs.instance_from_raw(&[0.0], "--instance"), Err(CliError::Usage(_))));
    }
}
