//! Task harnesses and metrics.

pub mod cluster;
pub mod metrics;
pub mod pairs;
pub mod readers;
pub mod sid;
pub mod svd;
pub mod usm;
pub mod wsd;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedstore::{LayerStore, StoreError};
use crate::inventory::InventoryError;
use crate::profiles::SenseProfile;
use crate::senseindex::IndexError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Inventory(#[from] InventoryError),
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),
    #[error("degenerate clustering: {0}")]
    DegenerateClustering(String),
    #[error("invalid dimensions: {0}")]
    DimError(String),
    #[error("sense {0} has no embedding")]
    MissingSense(String),
    #[error("no store record for {0}")]
    MissingRecord(String),
    #[error("no candidates for {lemma} ({pos}) in {instance}")]
    NoCandidates { instance: String, lemma: String, pos: String },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Wsd,
    Mfs,
    Usm,
    Wic,
    Gwcs,
    Scws,
    Sid,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Wsd => "wsd",
            Task::Mfs => "mfs",
            Task::Usm => "usm",
            Task::Wic => "wic",
            Task::Gwcs => "gwcs",
            Task::Scws => "scws",
            Task::Sid => "sid",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wsd" => Ok(Task::Wsd),
            "mfs" => Ok(Task::Mfs),
            "usm" => Ok(Task::Usm),
            "wic" => Ok(Task::Wic),
            "gwcs" => Ok(Task::Gwcs),
            "scws" => Ok(Task::Scws),
            "sid" => Ok(Task::Sid),
            _ => Err(format!("unknown task {s:?}")),
        }
    }
}

/// Metrics of one task run. Percentages and correlations are reported on a
/// 0-100 scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub dataset: String,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_pos: Option<BTreeMap<String, f64>>,
    pub n: usize,
    #[serde(default)]
    pub config_fingerprint: String,
}

impl EvalReport {
    pub fn new(task: Task, dataset: impl Into<String>, n: usize) -> Self {
        EvalReport {
            task,
            dataset: dataset.into(),
            metrics: BTreeMap::new(),
            per_pos: None,
            n,
            config_fingerprint: String::new(),
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// One row per report and POS: `task,dataset,pos,value`.
pub fn write_per_pos_csv(reports: &[EvalReport], writer: impl Write) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["task", "dataset", "pos", "value"])?;
    for r in reports {
        for (pos, v) in r.per_pos.iter().flatten() {
            w.write_record([r.task.to_string(), r.dataset.clone(), pos.clone(), format!("{v:.4}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Pools the store records named in `keys`, failing on the first absent one.
pub fn pooled_contexts(
    store: &LayerStore,
    profile: &SenseProfile,
    keys: &[String],
) -> Result<HashMap<String, Vec<f64>>, EvalError> {
    let wanted: HashSet<&str> = keys.iter().map(String::as_str).collect();
    let out = store.pool_where(profile, |k| wanted.contains(k))?;
    if let Some(missing) = keys.iter().find(|k| !out.contains_key(k.as_str())) {
        return Err(EvalError::MissingRecord(missing.clone()));
    }
    Ok(out)
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
