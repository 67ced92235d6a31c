//! Experiment configuration: flat `key = value` text or a JSON object.

use std::path::PathBuf;

use anticonc::laws::LawSpec;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const EXPERIMENTS: [&str; 7] = ["smallball", "tail", "detconc", "decoupling", "gapreduce", "rankgrow", "odlyzko"];

/// Keys left out of the hash: they never change results.
const UNHASHED: [&str; 2] = ["out", "workers"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub law: LawSpec,
    pub n: Option<usize>,
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub a_exp: Option<f64>,
    pub b_exp: Option<f64>,
    /// Rational literal.
    pub beta: Option<String>,
    pub epsilon: Option<f64>,
    pub gamma: f64,
    /// Probability bound the verdict is checked against.
    pub bound: Option<f64>,
    /// Subspace dimension for `odlyzko`; all of `1..n` when absent.
    pub k: Option<usize>,
    /// Bordering steps for `rankgrow`.
    pub steps: Option<usize>,
    /// Coefficients for `smallball`, rational literals.
    pub coeffs: Vec<String>,
    /// `gapreduce` instance: generators, box bounds and the values to cover.
    pub generators: Vec<String>,
    pub bounds: Vec<i64>,
    pub values: Vec<String>,
    /// `gapreduce` on `trials` random planted instances instead.
    pub planted: bool,
    /// Fixed part `F` as a whitespace-separated text matrix.
    pub f_file: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: String::new(),
            law: LawSpec::Bernoulli,
            n: None,
            n_list: Vec::new(),
            trials: 1000,
            seed: 0,
            a_exp: None,
            b_exp: None,
            beta: None,
            epsilon: None,
            gamma: 0.0,
            bound: None,
            k: None,
            steps: None,
            coeffs: Vec::new(),
            generators: Vec::new(),
            bounds: Vec::new(),
            values: Vec::new(),
            planted: false,
            f_file: None,
            out: None,
            workers: None,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Text,
    Int,
    Float,
    Bool,
    TextList,
    IntList,
}

fn kind_of(key: &str) -> Option<Kind> {
    Some(match key {
        "experiment" | "law" | "beta" | "f_file" | "out" => Kind::Text,
        "n" | "trials" | "seed" | "k" | "steps" | "workers" => Kind::Int,
        "a_exp" | "b_exp" | "epsilon" | "gamma" | "bound" => Kind::Float,
        "planted" => Kind::Bool,
        "coeffs" | "generators" | "values" => Kind::TextList,
        "n_list" | "bounds" => Kind::IntList,
        _ => return None,
    })
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::InvalidConfig { field: field.to_string(), message: message.into() }
}

fn int_value(key: &str, s: &str) -> Result<Value, CliError> {
    let s = s.trim();
    if let Ok(v) = s.parse::<u64>() {
        return Ok(Value::from(v));
    }
    s.parse::<i64>().map(Value::from).map_err(|_| invalid(key, format!("expected an integer, got `{s}`")))
}

fn list_items(s: &str) -> Vec<&str> {
    let s = s.trim().trim_start_matches('[').trim_end_matches(']').trim();
    if s.is_empty() {
        return Vec::new();
    }
    s.split(',').map(|t| t.trim().trim_matches('"')).collect()
}

/// Typed value for `key` from its text form.
fn typed(key: &str, text: &str) -> Result<Value, CliError> {
    let kind = kind_of(key).ok_or_else(|| invalid(key, "unknown key"))?;
    let text = text.trim();
    Ok(match kind {
        Kind::Text => Value::from(text.trim_matches('"')),
        Kind::Int => int_value(key, text)?,
        Kind::Float => Value::from(text.parse::<f64>().map_err(|_| invalid(key, format!("expected a number, got `{text}`")))?),
        Kind::Bool => Value::from(text.parse::<bool>().map_err(|_| invalid(key, format!("expected true or false, got `{text}`")))?),
        Kind::TextList => Value::Array(list_items(text).into_iter().map(Value::from).collect()),
        Kind::IntList => Value::Array(list_items(text).into_iter().map(|t| int_value(key, t)).collect::<Result<_, _>>()?),
    })
}

/// Text form of a JSON value, so both input formats share one typing path.
fn as_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(as_text).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

impl ExperimentConfig {
    /// Parses either format; JSON is recognised by a leading `{`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = Map::new();
        if text.trim_start().starts_with('{') {
            let obj: Map<String, Value> = serde_json::from_str(text).map_err(|e| invalid("<json>", e.to_string()))?;
            for (k, v) in obj {
                let value = typed(&k, &as_text(&v))?;
                map.insert(k, value);
            }
        } else {
            for (lineno, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| invalid(&format!("line {}", lineno + 1), "expected key = value"))?;
                let k = k.trim();
                map.insert(k.to_string(), typed(k, v)?);
            }
        }
        Self::from_map(map)
    }

    fn from_map(map: Map<String, Value>) -> Result<Self, CliError> {
        let mut cfg = ExperimentConfig::default();
        for (k, v) in map {
            cfg.set_value(&k, v)?;
        }
        Ok(cfg)
    }

    fn set_value(&mut self, key: &str, value: Value) -> Result<(), CliError> {
        let mut current = serde_json::to_value(&*self).expect("config serializes");
        current[key] = value;
        *self = serde_json::from_value(current).map_err(|e| invalid(key, e.to_string()))?;
        Ok(())
    }

    /// Sets one field from its text form, as in a `key=value` line.
    pub fn set(&mut self, key: &str, text: &str) -> Result<(), CliError> {
        let value = typed(key, text)?;
        self.set_value(key, value)
    }

    /// The sizes to sweep: `n_list`, else `[n]`, else `default`.
    pub fn sizes(&self, default: &[usize]) -> Vec<usize> {
        if !self.n_list.is_empty() {
            self.n_list.clone()
        } else if let Some(n) = self.n {
            vec![n]
        } else {
            default.to_vec()
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !EXPERIMENTS.contains(&self.experiment.as_str()) {
            return Err(CliError::UnknownExperiment(self.experiment.clone()));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers", "must be positive"));
        }
        if self.n == Some(0) || self.n_list.contains(&0) {
            return Err(invalid("n", "sizes must be positive"));
        }
        if let Some(b) = self.bound {
            if !(0.0..=1.0).contains(&b) {
                return Err(invalid("bound", "must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Sorted-key JSON without the unhashed keys.
    pub fn canonical(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().expect("config is an object");
        for k in UNHASHED {
            obj.remove(k);
        }
        let sorted: std::collections::BTreeMap<&String, &Value> = obj.iter().collect();
        serde_json::to_string(&sorted).expect("canonical form serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}
