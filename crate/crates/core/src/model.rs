//! The black-box model abstraction and the JSON model loader.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Normalization;
use crate::error::{Error, Result};
use crate::synth;

/// A scalar-output predictor over `arity()`-dimensional inputs.
///
/// Implementations must be pure: the same input always gives the same
/// output, and evaluation must not mutate shared state. Estimators evaluate
/// models from several threads at once unless [`Model::is_reentrant`]
/// returns `false`.
pub trait Model: Send + Sync {
    fn arity(&self) -> usize;

    fn predict(&self, x: &[f64]) -> Result<f64>;

    fn is_reentrant(&self) -> bool {
        true
    }
}

impl<M: Model + ?Sized> Model for &M {
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn predict(&self, x: &[f64]) -> Result<f64> {
        (**self).predict(x)
    }
    fn is_reentrant(&self) -> bool {
        (**self).is_reentrant()
    }
}

impl<M: Model + ?Sized> Model for Box<M> {
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn predict(&self, x: &[f64]) -> Result<f64> {
        (**self).predict(x)
    }
    fn is_reentrant(&self) -> bool {
        (**self).is_reentrant()
    }
}

impl<M: Model + ?Sized> Model for Arc<M> {
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn predict(&self, x: &[f64]) -> Result<f64> {
        (**self).predict(x)
    }
    fn is_reentrant(&self) -> bool {
        (**self).is_reentrant()
    }
}

/// Wraps a closure as a model.
pub struct FnModel<F> {
    arity: usize,
    f: F,
}

impl<F> FnModel<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(arity: usize, f: F) -> Self {
        FnModel { arity, f }
    }
}

impl<F> Model for FnModel<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn arity(&self) -> usize {
        self.arity
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        check_arity(self.arity, x)?;
        Ok((self.f)(x))
    }
}

/// `w·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearModel {
    pub fn new(w: Vec<f64>, b: f64) -> Self {
        LinearModel { w, b }
    }
}

impl Model for LinearModel {
    fn arity(&self) -> usize {
        self.w.len()
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        check_arity(self.w.len(), x)?;
        Ok(self.w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "identity" | "linear" => Some(Activation::Identity),
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "sigmoid" => Some(Activation::Sigmoid),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Identity => v,
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
        }
    }
}

/// A fully connected layer; `weights` is `outputs × inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.bias).map(|(row, b)| {
            let z = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b;
            self.activation.apply(z)
        }));
    }
}

/// A multilayer perceptron evaluated at inference; one output is explained.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    output_index: usize,
}

impl Mlp {
    pub fn new(layers: Vec<Dense>, output_index: usize) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::InvalidInput("mlp needs at least one dense layer".into()));
        };
        let mut width = first.inputs;
        for (k, layer) in layers.iter().enumerate() {
            if layer.inputs != width {
                return Err(Error::InvalidInput(format!(
                    "layer {k}: expects {} inputs, previous layer yields {width}",
                    layer.inputs
                )));
            }
            if layer.weights.len() != layer.inputs * layer.outputs || layer.bias.len() != layer.outputs {
                return Err(Error::InvalidInput(format!("layer {k}: inconsistent weight/bias sizes")));
            }
            width = layer.outputs;
        }
        if output_index >= width {
            return Err(Error::InvalidInput(format!(
                "output_index {output_index} out of range for {width} outputs"
            )));
        }
        Ok(Mlp {
            layers,
            output_index,
        })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn output_index(&self) -> usize {
        self.output_index
    }

    /// Full output vector of the network.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_arity(self.arity(), x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }
}

impl Model for Mlp {
    fn arity(&self) -> usize {
        self.layers[0].inputs
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward(x)?[self.output_index])
    }
}

/// Evaluates a raw-space model on z-scored inputs.
pub struct NormalizedModel<M> {
    inner: M,
    norm: Normalization,
}

impl<M: Model> NormalizedModel<M> {
    pub fn new(inner: M, norm: Normalization) -> Result<Self> {
        if norm.mean.len() != inner.arity() {
            return Err(Error::DimensionMismatch {
                expected: inner.arity(),
                got: norm.mean.len(),
            });
        }
        Ok(NormalizedModel { inner, norm })
    }
}

impl<M: Model> Model for NormalizedModel<M> {
    fn arity(&self) -> usize {
        self.inner.arity()
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        check_arity(self.arity(), x)?;
        self.inner.predict(&self.norm.denormalize(x))
    }

    fn is_reentrant(&self) -> bool {
        self.inner.is_reentrant()
    }
}

pub(crate) fn check_arity(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum ModelFile {
    Linear {
        w: Vec<f64>,
        b: f64,
    },
    Mlp {
        layers: Vec<serde_json::Value>,
        #[serde(default)]
        output_index: usize,
    },
    Gtm {
        name: String,
        #[serde(default)]
        normalization: Option<Normalization>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DenseFile {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    #[serde(default = "default_activation")]
    activation: String,
}

fn default_activation() -> String {
    "identity".into()
}

/// Loads a model from its JSON description.
///
/// Three shapes are accepted: `linear` (`w`, `b`), `mlp` (`layers`, each a
/// dense `{w, b, activation}` with `w` given as one row per output unit, or
/// a `{"dropout": rate}` entry that is the identity at inference, plus an
/// optional `output_index`), and `gtm` (a built-in ground-truth function by
/// name, optionally with the normalization it should undo).
pub fn load_model(path: impl AsRef<Path>) -> Result<Box<dyn Model>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text, path)
}

/// Parses a model description; `origin` is used in error messages.
pub fn model_from_json(text: &str, origin: &Path) -> Result<Box<dyn Model>> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?;
    match file {
        ModelFile::Linear { w, b } => {
            if w.is_empty() {
                return Err(Error::parse(origin, "linear model needs at least one weight"));
            }
            Ok(Box::new(LinearModel::new(w, b)))
        }
        ModelFile::Mlp {
            layers,
            output_index,
        } => Ok(Box::new(parse_mlp(&layers, output_index, origin)?)),
        ModelFile::Gtm {
            name,
            normalization,
        } => {
            let gtm = synth::gtm(&name).map_err(|e| Error::parse(origin, e))?;
            match normalization {
                None => Ok(Box::new(gtm)),
                Some(norm) => Ok(Box::new(
                    NormalizedModel::new(gtm, norm).map_err(|e| Error::parse(origin, e))?,
                )),
            }
        }
    }
}

fn parse_mlp(layers: &[serde_json::Value], output_index: usize, origin: &Path) -> Result<Mlp> {
    let layer_err = |layer: usize, message: String| Error::Layer {
        path: origin.to_path_buf(),
        layer,
        message,
    };
    let mut dense = Vec::new();
    let mut width: Option<usize> = None;
    for (k, value) in layers.iter().enumerate() {
        if value.get("dropout").is_some() {
            continue;
        }
        let spec: DenseFile =
            serde_json::from_value(value.clone()).map_err(|e| layer_err(k, e.to_string()))?;
        let activation = Activation::parse(&spec.activation)
            .ok_or_else(|| layer_err(k, format!("unknown activation `{}`", spec.activation)))?;
        let outputs = spec.w.len();
        if outputs == 0 {
            return Err(layer_err(k, "weight matrix has no rows".into()));
        }
        let inputs = spec.w[0].len();
        if inputs == 0 || spec.w.iter().any(|row| row.len() != inputs) {
            return Err(layer_err(k, "weight rows have unequal or zero length".into()));
        }
        if spec.b.len() != outputs {
            return Err(layer_err(
                k,
                format!("bias has {} entries, weight matrix has {outputs} rows", spec.b.len()),
            ));
        }
        if let Some(prev) = width {
            if prev != inputs {
                return Err(layer_err(
                    k,
                    format!("layer expects {inputs} inputs but previous layer yields {prev}"),
                ));
            }
        }
        width = Some(outputs);
        dense.push(Dense {
            inputs,
            outputs,
            weights: spec.w.into_iter().flatten().collect(),
            bias: spec.b,
            activation,
        });
    }
    if dense.is_empty() {
        return Err(Error::parse(origin, "mlp has no dense layers"));
    }
    Mlp::new(dense, output_index).map_err(|e| Error::parse(origin, e))
}
