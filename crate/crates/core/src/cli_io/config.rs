//! Run configuration: one JSON document per run.
//!
//! ```json
//! {
//!   "command": "flow-ode",
//!   "geometry": "berger",
//!   "params": { "lambda1": 1.0, "lambda2": 2.0 },
//!   "numerics": { "tol": 1e-9, "t_end": 1.0 },
//!   "outputs": { "trace": "berger.csv" }
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Curvature,
    FlowOde,
    FlowBe,
    FlowBundle,
    Verify,
    Plot,
}

impl Command {
    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| Error::Config(format!("unknown command {s:?}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub tol: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub resolution: Option<Vec<usize>>,
    pub oracle_step: Option<f64>,
    pub record_every: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// Trace file, relative to the output directory.
    pub trace: Option<String>,
    /// Report or plot file, relative to the output directory.
    pub report: Option<String>,
    pub plot: Option<String>,
    /// Trace files or directories read by `plot`.
    #[serde(default)]
    pub inputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub geometry: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Several parameter sets, one trajectory each (flow-ode only).
    #[serde(default)]
    pub runs: Vec<BTreeMap<String, f64>>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub outputs: Outputs,
    /// Names of verification checks; all of them when absent.
    #[serde(default)]
    pub checks: Vec<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn geometry(&self) -> Result<&str> {
        self.geometry.as_deref().ok_or_else(|| Error::Config("geometry is required".into()))
    }
}

/// Parameter lookup that remembers which keys were consumed so leftovers
/// can be reported.
pub struct Params<'a> {
    map: &'a BTreeMap<String, f64>,
    allowed: Vec<&'static str>,
}

impl<'a> Params<'a> {
    /// Rejects keys outside `allowed` up front.
    pub fn new(map: &'a BTreeMap<String, f64>, allowed: &[&'static str]) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown parameter {k:?}; expected one of {allowed:?}")));
        }
        Ok(Self { map, allowed: allowed.to_vec() })
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        debug_assert!(self.allowed.contains(&key));
        self.map.get(key).copied()
    }

    pub fn require(&self, key: &str) -> Result<f64> {
        self.get(key).ok_or_else(|| Error::Config(format!("missing parameter {key:?}")))
    }

    pub fn or(&self, key: &str, default: f64) -> f64 {
        self.get(key).unwrap_or(default)
    }

    /// A positive integer parameter.
    pub fn count(&self, key: &str, default: u32) -> Result<u32> {
        let v = self.or(key, default as f64);
        if v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(Error::Config(format!("{key} must be a positive integer, got {v}")));
        }
        Ok(v as u32)
    }
}
