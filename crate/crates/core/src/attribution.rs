use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::write_atomic;
use crate::error::{Error, Result};

/// A per-feature attribution vector and the settings that produced it.
///
/// `base_variance` is `Var(∅)` for variance-game methods and the surrogate
/// intercept (or `v(∅)`) for the SHAP/LIME baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub phi: Vec<f64>,
    pub method: String,
    pub params: BTreeMap<String, Value>,
    pub seed: u64,
    pub base_variance: f64,
}

impl Attribution {
    pub fn new(method: impl Into<String>, phi: Vec<f64>, seed: u64, base_variance: f64) -> Self {
        Attribution {
            phi,
            method: method.into(),
            params: BTreeMap::new(),
            seed,
            base_variance,
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    pub fn param_f64(&self, key: &str) -> Option<f64> {
        self.params.get(key).and_then(Value::as_f64)
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        if let Some(i) = self.phi.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("phi[{i}] is not finite")));
        }
        Ok(())
    }
}

pub fn save_attribution(attribution: &Attribution, path: impl AsRef<Path>) -> Result<()> {
    let mut text = attribution.to_json()?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_attribution(path: impl AsRef<Path>) -> Result<Attribution> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let a: Attribution = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    a.validate().map_err(|e| Error::parse(path, e))?;
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn save_load_reproduces_phi(phi in proptest::collection::vec(-1e300f64..1e300, 1..20), seed in any::<u64>()) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("a.json");
            let a = Attribution::new("varshap", phi.clone(), seed, 0.25).with_param("sigma", 0.6);
            save_attribution(&a, &path).unwrap();
            let b = load_attribution(&path).unwrap();
            prop_assert_eq!(b.phi.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            phi.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(b, a);
        }
    }

    #[test]
    fn keys_are_snake_case() {
        let a = Attribution::new("lime", vec![1.0], 3, 0.5);
        let text = a.to_json().unwrap();
        for key in ["\"phi\"", "\"method\"", "\"params\"", "\"seed\"", "\"base_variance\""] {
            assert!(text.contains(key), "{key} missing in {text}");
        }
    }

    #[test]
    fn non_finite_phi_rejected() {
        let a = Attribution::new("x", vec![f64::NAN], 0, 0.0);
        assert!(a.to_json().is_err());
    }
}
