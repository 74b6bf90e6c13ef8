//! Layer probing and sense profiles.
//!
//! A sense profile is a weight per layer (index 0 = INIT, last = final layer)
//! obtained by softmaxing per-layer probing F1 scores with a temperature, or
//! one of the conventional fixed poolings used as baselines.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::AnnotatedCorpus;
use crate::embedstore::{LayerStore, StoreError};
use crate::inventory::{Level, SenseInventory};
use crate::senseindex::{IndexError, SenseIndex};
use crate::senselearn::{learn_from_annotations, LearnError, SynsetMode};

/// Temperatures swept when comparing profiles.
pub const TEMPERATURE_SWEEP: [f64; 5] = [0.002, 0.005, 0.01, 0.1, 1.0];
pub const DEFAULT_WSD_TEMPERATURE: f64 = 0.005;
pub const DEFAULT_USM_TEMPERATURE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("{kind} needs at least {needed} layers, got {got}")]
    TooFewLayers { kind: FixedPooling, needed: usize, got: usize },
    #[error("invalid scores: {0}")]
    InvalidScores(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("gold sense {0} is not represented in the probing training data")]
    UnrepresentedGoldSense(String),
    #[error("train and validation stores differ in layer count ({0} vs {1})")]
    LayerMismatch(usize, usize),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Task used when probing layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeMode {
    Wsd,
    Usm,
}

impl FromStr for ProbeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wsd" => Ok(ProbeMode::Wsd),
            "usm" => Ok(ProbeMode::Usm),
            _ => Err(format!("unknown probe mode {s:?}")),
        }
    }
}

impl fmt::Display for ProbeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeMode::Wsd => "wsd",
            ProbeMode::Usm => "usm",
        })
    }
}

/// Conventional poolings over the last layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPooling {
    Last,
    SecondToLast,
    SumLast4,
    WsIntLast4,
    WsFracLast4,
}

impl FixedPooling {
    pub const ALL: [FixedPooling; 5] = [
        FixedPooling::Last,
        FixedPooling::SecondToLast,
        FixedPooling::SumLast4,
        FixedPooling::WsIntLast4,
        FixedPooling::WsFracLast4,
    ];

    /// Unnormalized weights for reverse indices -1, -2, ...
    fn tail_weights(self) -> &'static [f64] {
        match self {
            FixedPooling::Last => &[1.0],
            FixedPooling::SecondToLast => &[0.0, 1.0],
            FixedPooling::SumLast4 => &[1.0, 1.0, 1.0, 1.0],
            FixedPooling::WsIntLast4 => &[1.0, 2.0, 3.0, 4.0],
            FixedPooling::WsFracLast4 => &[1.0 / 4.0, 1.0 / 3.0, 1.0 / 2.0, 1.0],
        }
    }

    fn min_layers(self) -> usize {
        match self {
            FixedPooling::Last => 2,
            FixedPooling::SecondToLast => 2,
            // the last four layers must not include INIT
            _ => 5,
        }
    }
}

impl fmt::Display for FixedPooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FixedPooling::Last => "last",
            FixedPooling::SecondToLast => "second_to_last",
            FixedPooling::SumLast4 => "sum_last4",
            FixedPooling::WsIntLast4 => "ws_int_last4",
            FixedPooling::WsFracLast4 => "ws_frac_last4",
        })
    }
}

impl FromStr for FixedPooling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FixedPooling::ALL
            .into_iter()
            .find(|k| k.to_string() == s.to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| format!("unknown fixed pooling {s:?}"))
    }
}

/// How a profile's weights were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProfileKind {
    Wsd,
    Usm,
    Fixed(FixedPooling),
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileKind::Wsd => f.write_str("wsd"),
            ProfileKind::Usm => f.write_str("usm"),
            ProfileKind::Fixed(k) => k.fmt(f),
        }
    }
}

impl FromStr for ProfileKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.parse::<ProbeMode>() {
            Ok(ProbeMode::Wsd) => Ok(ProfileKind::Wsd),
            Ok(ProbeMode::Usm) => Ok(ProfileKind::Usm),
            Err(_) => s.parse().map(ProfileKind::Fixed),
        }
    }
}

impl Serialize for ProfileKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProfileKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl From<ProbeMode> for ProfileKind {
    fn from(m: ProbeMode) -> Self {
        match m {
            ProbeMode::Wsd => ProfileKind::Wsd,
            ProbeMode::Usm => ProfileKind::Usm,
        }
    }
}

/// Per-layer probing F1 scores in [0, 100], index 0 = INIT.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerScores {
    #[serde(rename = "model")]
    pub model_tag: String,
    pub mode: ProbeMode,
    pub scores: Vec<f64>,
}

impl LayerScores {
    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.scores.is_empty() {
            return Err(ProfileError::InvalidScores("no layers".into()));
        }
        if let Some(s) = self.scores.iter().find(|s| !(0.0..=100.0).contains(*s)) {
            return Err(ProfileError::InvalidScores(format!("score {s} outside [0, 100]")));
        }
        Ok(())
    }

    pub fn best_layer(&self) -> usize {
        self.scores.iter().enumerate().fold(0, |best, (i, s)| if *s > self.scores[best] { i } else { best })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SenseProfile {
    #[serde(rename = "model")]
    pub model_tag: String,
    #[serde(rename = "mode")]
    pub kind: ProfileKind,
    #[serde(rename = "t")]
    pub temperature: Option<f64>,
    pub weights: Vec<f64>,
}

impl SenseProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ProfileError::InvalidProfile("weights must be finite and non-negative".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ProfileError::InvalidProfile(format!("weights sum to {sum}, expected 1")));
        }
        if let Some(t) = self.temperature {
            if t <= 0.0 {
                return Err(ProfileError::NonPositiveTemperature(t));
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    /// Short description used as provenance in sense embedding files.
    pub fn tag(&self) -> String {
        match self.temperature {
            Some(t) => format!("{}:{}:t={}", self.model_tag, self.kind, t),
            None => format!("{}:{}", self.model_tag, self.kind),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ProfileError> {
        let p: SenseProfile = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    /// All weight on one layer.
    pub fn one_hot(model_tag: &str, layer: usize, layers: usize) -> Self {
        let mut weights = vec![0.0; layers];
        weights[layer] = 1.0;
        SenseProfile { model_tag: model_tag.to_string(), kind: ProfileKind::Wsd, temperature: None, weights }
    }
}

/// Temperature-scaled softmax over layer scores. The maximum score is
/// subtracted before exponentiation.
pub fn softmax_weights(scores: &LayerScores, t: f64) -> Result<SenseProfile, ProfileError> {
    if t.is_nan() || t <= 0.0 {
        return Err(ProfileError::NonPositiveTemperature(t));
    }
    if scores.scores.is_empty() || scores.scores.iter().any(|s| !s.is_finite()) {
        return Err(ProfileError::InvalidScores("scores must be finite and non-empty".into()));
    }
    let max = scores.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.scores.iter().map(|s| ((s - max) / t).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(SenseProfile {
        model_tag: scores.model_tag.clone(),
        kind: scores.mode.into(),
        temperature: Some(t),
        weights: exps.into_iter().map(|e| e / total).collect(),
    })
}

pub fn fixed_profile(kind: FixedPooling, layer_count: usize, model_tag: &str) -> Result<SenseProfile, ProfileError> {
    if layer_count < kind.min_layers() {
        return Err(ProfileError::TooFewLayers { kind, needed: kind.min_layers(), got: layer_count });
    }
    let tail = kind.tail_weights();
    let total: f64 = tail.iter().sum();
    let mut weights = vec![0.0; layer_count];
    for (back, w) in tail.iter().enumerate() {
        weights[layer_count - 1 - back] = w / total;
    }
    Ok(SenseProfile { model_tag: model_tag.to_string(), kind: ProfileKind::Fixed(kind), temperature: None, weights })
}

/// Scores every layer by learning sensekey centroids from `train` at that
/// layer alone and evaluating nearest-neighbour F1 on `val`.
///
/// Every gold sense in `val` must be annotated in `train`; restrict the
/// validation corpus beforehand with [`crate::corpus::restrict_to_seen`].
pub fn probe_layers(
    train: &AnnotatedCorpus,
    train_store: &LayerStore,
    val: &AnnotatedCorpus,
    val_store: &LayerStore,
    inventory: &SenseInventory,
    mode: ProbeMode,
) -> Result<LayerScores, ProfileError> {
    let layers = train_store.header().layers();
    if val_store.header().layers() != layers {
        return Err(ProfileError::LayerMismatch(layers, val_store.header().layers()));
    }
    let represented: HashSet<&str> = train.sense_keys();
    if let Some(missing) =
        val.instances.iter().flat_map(|i| i.gold_keys.iter()).find(|k| !represented.contains(k.as_str()))
    {
        return Err(ProfileError::UnrepresentedGoldSense(missing.clone()));
    }
    let model_tag = train_store.header().model_tag.clone();

    let scores = (0..layers)
        .into_par_iter()
        .map(|layer| {
            let profile = SenseProfile::one_hot(&model_tag, layer, layers);
            let senses =
                learn_from_annotations(train, train_store, &profile, inventory, Level::Sensekey, SynsetMode::Direct)?;
            let index = SenseIndex::build(&senses)?;
            let instances: HashSet<&str> = val.annotated().map(|i| i.id.as_str()).collect();
            let contexts = val_store.pool_where(&profile, |k| instances.contains(k))?;
            let mut correct = 0usize;
            let mut total = 0usize;
            for inst in val.annotated() {
                let ctx = contexts.get(&inst.id).ok_or_else(|| StoreError::MissingRecord(inst.id.clone()))?;
                let predicted = match mode {
                    ProbeMode::Wsd => {
                        let candidates: Vec<&str> = inventory
                            .candidates(&inst.lemma, inst.pos)
                            .into_iter()
                            .filter(|c| index.contains(c))
                            .collect();
                        if candidates.is_empty() {
                            None
                        } else {
                            Some(index.disambiguate(ctx, &candidates)?.0.to_string())
                        }
                    }
                    ProbeMode::Usm => index.match_topk(ctx, 1)?.first().map(|(id, _)| id.to_string()),
                };
                total += 1;
                if predicted.is_some_and(|p| inst.gold_keys.contains(&p)) {
                    correct += 1;
                }
            }
            Ok(if total == 0 { 0.0 } else { 100.0 * correct as f64 / total as f64 })
        })
        .collect::<Result<Vec<f64>, ProfileError>>()?;

    Ok(LayerScores { model_tag, mode, scores })
}

/// Column label for a layer: `INIT` for index 0, then reverse indices.
pub fn layer_label(layer: usize, layers: usize) -> String {
    if layer == 0 {
        "INIT".to_string()
    } else {
        format!("-{}", layers - layer)
    }
}

/// Heatmap CSV: one row per model, columns `INIT, -K, ..., -1` aligned on the
/// final layer. Models with fewer layers leave leading cells empty.
pub fn write_heatmap_csv(rows: &[LayerScores], writer: impl Write) -> Result<(), ProfileError> {
    let max_layers = rows.iter().map(|r| r.scores.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["model".to_string(), "mode".to_string()];
    header.extend((0..max_layers).map(|l| layer_label(l, max_layers)));
    w.write_record(&header).map_err(std::io::Error::from)?;
    for row in rows {
        let n = row.scores.len();
        let mut cells = vec![row.model_tag.clone(), row.mode.to_string()];
        cells.push(row.scores.first().map(|s| format!("{s:.2}")).unwrap_or_default());
        for _ in n..max_layers {
            cells.push(String::new());
        }
        cells.extend(row.scores.iter().skip(1).map(|s| format!("{s:.2}")));
        w.write_record(&cells).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}
