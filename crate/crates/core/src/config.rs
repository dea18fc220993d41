//! JSON system description.
//!
//! ```json
//! {
//!   "name": "example",
//!   "dim": 2,
//!   "tensors": [
//!     { "order": 2, "dense": [[0.1, 0.1], [0.1, 0.1]] },
//!     { "order": 3, "fill": 1.0,
//!       "entries": [ { "idx": [1, 1, 2], "value": 0.5 } ] }
//!   ],
//!   "constant": [0.0, 0.0]
//! }
//! ```
//!
//! Indices are 1-based, the first index is the tail. `dense` is either a
//! nested array of depth `order` or a flat row-major array of length
//! `dim^order`. Without `dense`, every entry equals `fill` (default 0) except
//! the listed ones.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::system::PolySystem;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dim: usize,
    pub tensors: Vec<TensorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorConfig {
    pub order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fill: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<EntryConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryConfig {
    pub idx: Vec<usize>,
    pub value: f64,
}

fn config_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

/// Reads the document into the schema types, reporting the offending field
/// path on schema violations.
pub fn parse_config(text: &str) -> Result<SystemConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        config_err(if path == "." || path == "?" { "$".to_string() } else { format!("$.{path}") }, inner.to_string())
    })
}

pub fn parse_system_config(text: &str) -> Result<PolySystem> {
    parse_config(text)?.to_system()
}

pub fn load_config(path: &Path) -> Result<SystemConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(path.display().to_string(), e.to_string()))?;
    parse_config(&text)
}

pub fn load_system(path: &Path) -> Result<PolySystem> {
    load_config(path)?.to_system()
}

impl SystemConfig {
    pub fn to_system(&self) -> Result<PolySystem> {
        let n = self.dim;
        if n == 0 {
            return Err(config_err("$.dim", "must be at least 1"));
        }
        if self.tensors.is_empty() {
            return Err(config_err("$.tensors", "at least one tensor is required"));
        }
        let mut orders = HashSet::new();
        let mut tensors = Vec::with_capacity(self.tensors.len());
        for (t, cfg) in self.tensors.iter().enumerate() {
            let path = format!("$.tensors[{t}]");
            if !orders.insert(cfg.order) {
                return Err(config_err(
                    format!("{path}.order"),
                    format!("duplicate tensor of order {}", cfg.order),
                ));
            }
            tensors.push(cfg.to_tensor(n, &path)?);
        }
        if let Some(b) = &self.constant {
            if b.len() != n {
                return Err(config_err(
                    "$.constant",
                    format!("expected {n} entries, got {}", b.len()),
                ));
            }
        }
        PolySystem::new(n, tensors, self.constant.clone())
    }

    /// Sparse description of `sys`: one entry per nonzero, no fill.
    pub fn from_system(sys: &PolySystem, name: Option<String>) -> SystemConfig {
        let tensors = sys
            .tensors()
            .map(|t| TensorConfig {
                order: t.order(),
                dense: None,
                fill: None,
                entries: t
                    .nonzeros()
                    .map(|(idx, value)| EntryConfig { idx: idx.iter().map(|i| i + 1).collect(), value })
                    .collect(),
            })
            .collect();
        SystemConfig {
            name,
            dim: sys.dim(),
            tensors,
            constant: sys.constant().map(<[f64]>::to_vec),
        }
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl TensorConfig {
    fn to_tensor(&self, n: usize, path: &str) -> Result<Tensor> {
        let k = self.order;
        if k < 2 {
            return Err(config_err(format!("{path}.order"), "order must be at least 2"));
        }
        let len = (n as u128).pow(k as u32);
        if len > 1 << 28 {
            return Err(config_err(path, format!("{n}^{k} entries is too large")));
        }
        let mut data = match &self.dense {
            Some(dense) => {
                if self.fill.is_some() || !self.entries.is_empty() {
                    return Err(config_err(
                        format!("{path}.dense"),
                        "dense cannot be combined with fill or entries",
                    ));
                }
                let mut out = Vec::with_capacity(len as usize);
                read_dense(dense, n, k, len as usize, &format!("{path}.dense"), &mut out)?;
                out
            }
            None => vec![self.fill.unwrap_or(0.0); len as usize],
        };
        let mut seen = HashSet::new();
        for (e, entry) in self.entries.iter().enumerate() {
            let epath = format!("{path}.entries[{e}]");
            if entry.idx.len() != k {
                return Err(config_err(
                    format!("{epath}.idx"),
                    format!("expected {k} indices, got {}", entry.idx.len()),
                ));
            }
            if let Some(&i) = entry.idx.iter().find(|&&i| i == 0 || i > n) {
                return Err(config_err(
                    format!("{epath}.idx"),
                    format!("index {i} outside 1..={n} in {:?}", entry.idx),
                ));
            }
            if !seen.insert(&entry.idx) {
                return Err(config_err(
                    format!("{epath}.idx"),
                    format!("duplicate index {:?}", entry.idx),
                ));
            }
            let flat = entry.idx.iter().fold(0, |f, &i| f * n + (i - 1));
            data[flat] = entry.value;
        }
        Tensor::new(k, n, data).map_err(|e| config_err(path, e.to_string()))
    }
}

/// A standalone dense array (nested or flat) as a tensor of the given order;
/// `dim` is inferred from the array shape.
pub fn parse_dense_tensor(text: &str, order: usize) -> Result<Tensor> {
    if order < 2 {
        return Err(config_err("$", "order must be at least 2"));
    }
    let value: Value = serde_json::from_str(text).map_err(|e| config_err("$", e.to_string()))?;
    let arr = value.as_array().ok_or_else(|| config_err("$", "expected an array"))?;
    let n = if arr.iter().all(Value::is_number) {
        // flat: length n^order
        let n = (arr.len() as f64).powf(1.0 / order as f64).round() as usize;
        if n == 0 || n.checked_pow(order as u32) != Some(arr.len()) {
            return Err(config_err("$", format!("flat length {} is not n^{order}", arr.len())));
        }
        n
    } else {
        arr.len()
    };
    let len = n
        .checked_pow(order as u32)
        .filter(|&l| l <= 1 << 28)
        .ok_or_else(|| config_err("$", "array too large"))?;
    let mut out = Vec::with_capacity(len);
    read_dense(&value, n, order, len, "$", &mut out)?;
    Tensor::new(order, n, out).map_err(|e| config_err("$", e.to_string()))
}

fn read_dense(v: &Value, n: usize, depth: usize, len: usize, path: &str, out: &mut Vec<f64>) -> Result<()> {
    let arr = v
        .as_array()
        .ok_or_else(|| config_err(path, "expected an array"))?;
    // top level only: nested levels pass usize::MAX
    let flat = arr.len() == len && arr.iter().all(Value::is_number);
    if flat {
        for x in arr {
            out.push(x.as_f64().expect("checked number"));
        }
        return Ok(());
    }
    if arr.len() != n {
        return Err(config_err(
            path,
            format!("expected {n} elements (nested) or {len} numbers (flat), got {}", arr.len()),
        ));
    }
    for (i, item) in arr.iter().enumerate() {
        let p = format!("{path}[{i}]");
        if depth == 1 {
            out.push(item.as_f64().ok_or_else(|| config_err(&p, "expected a number"))?);
        } else {
            read_dense(item, n, depth - 1, usize::MAX, &p, out)?;
        }
    }
    Ok(())
}
