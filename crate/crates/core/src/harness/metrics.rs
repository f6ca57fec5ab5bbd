//! Accuracy metrics and result rows.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, MsgpError, Result};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `MAE(y_true, y_pred) / MAE(y_true, mean(y_true))`.
pub fn smae(y_pred: &[f64], y_true: &[f64]) -> Result<f64> {
    check_len(y_true.len(), y_pred.len())?;
    if y_true.is_empty() {
        return Err(MsgpError::InvalidArgument("SMAE of empty vectors".into()));
    }
    let mu = mean(y_true);
    let base = mean(&y_true.iter().map(|v| (v - mu).abs()).collect::<Vec<_>>());
    if base == 0.0 {
        return Err(MsgpError::InvalidArgument("SMAE undefined for constant targets".into()));
    }
    let mae = mean(&y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).collect::<Vec<_>>());
    Ok(mae / base)
}

/// `Σ|a − b| / Σ|b|`.
pub fn relative_abs_diff(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(b.len(), a.len())?;
    let den: f64 = b.iter().map(|v| v.abs()).sum();
    if den == 0.0 {
        return Err(MsgpError::InvalidArgument("relative difference against zero reference".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / den)
}

/// Parameter value in a result row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Int(u64),
    Float(f64),
    Text(String),
}

impl std::fmt::Display for Param {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Param::Int(v) => write!(f, "{v}"),
            Param::Float(v) => write!(f, "{v}"),
            Param::Text(v) => write!(f, "{v}"),
        }
    }
}

impl From<usize> for Param {
    fn from(v: usize) -> Self {
        Param::Int(v as u64)
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Float(v)
    }
}

impl From<&str> for Param {
    fn from(v: &str) -> Self {
        Param::Text(v.into())
    }
}

impl From<String> for Param {
    fn from(v: String) -> Self {
        Param::Text(v)
    }
}

/// One parameter combination. `metrics` are deterministic given config and
/// seed; `timings` (seconds) are not.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub experiment: String,
    pub params: BTreeMap<String, Param>,
    pub metrics: BTreeMap<String, f64>,
    pub timings: BTreeMap<String, f64>,
}

impl MetricsRow {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.into(),
            ..Self::default()
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Param>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    pub fn timing(&mut self, key: &str, seconds: f64) {
        self.timings.insert(key.into(), seconds);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }
}
