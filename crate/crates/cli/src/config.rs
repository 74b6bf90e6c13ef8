//! Pipeline configuration: one TOML document plus dotted-path overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use sensekit::eval::pairs::Subtask2Mode;
use sensekit::inventory::Level;
use sensekit::profiles::{ProbeMode, ProfileKind, DEFAULT_USM_TEMPERATURE, DEFAULT_WSD_TEMPERATURE};
use sensekit::senselearn::{ExportFormat, MergeMode, SynsetMode};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("override {0:?} must have the form key.path=value")]
    BadOverride(String),
    #[error("{field}: {reason}")]
    Field { field: String, reason: String },
}

impl ConfigError {
    fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Field { field: field.into(), reason: reason.into() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorporaConfig {
    /// Training corpora, concatenated in order.
    pub train: Vec<PathBuf>,
    /// Probing validation corpus.
    pub validation: Option<PathBuf>,
    /// Named test corpora.
    pub test: BTreeMap<String, PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StoresConfig {
    pub train: Vec<PathBuf>,
    pub validation: Vec<PathBuf>,
    pub glosses: Vec<PathBuf>,
    /// Store files per test corpus name.
    pub test: BTreeMap<String, Vec<PathBuf>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    /// `wsd`, `usm` or a fixed pooling name.
    pub kind: ProfileKind,
    /// Softmax temperature; defaults by mode.
    pub t: Option<f64>,
    /// Layer scores JSON for softmax profiles; defaults to the probe output.
    pub scores: Option<PathBuf>,
    /// Ready-made profile JSON, used as is.
    pub file: Option<PathBuf>,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig { kind: ProfileKind::Wsd, t: None, scores: None, file: None }
    }
}

impl ProfileConfig {
    pub fn temperature(&self) -> Option<f64> {
        match self.kind {
            ProfileKind::Wsd => Some(self.t.unwrap_or(DEFAULT_WSD_TEMPERATURE)),
            ProfileKind::Usm => Some(self.t.unwrap_or(DEFAULT_USM_TEMPERATURE)),
            ProfileKind::Fixed(_) => None,
        }
    }

    pub fn probe_mode(&self) -> Option<ProbeMode> {
        match self.kind {
            ProfileKind::Wsd => Some(ProbeMode::Wsd),
            ProfileKind::Usm => Some(ProbeMode::Usm),
            ProfileKind::Fixed(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnConfig {
    pub level: Level,
    pub synset_mode: SynsetMode,
    /// Gloss merge; absent means no gloss vectors.
    pub merge: Option<MergeMode>,
    pub propagate: bool,
    pub format: ExportFormat,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            level: Level::Sensekey,
            synset_mode: SynsetMode::Direct,
            merge: None,
            propagate: true,
            format: ExportFormat::Text,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairTaskConfig {
    pub gold: PathBuf,
    #[serde(default)]
    pub stores: Vec<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    /// Sense embeddings to evaluate; defaults to the learn output.
    pub embeddings: Option<PathBuf>,
    /// Rank cutoff for USM MRR; none means full ranking.
    pub usm_cutoff: Option<usize>,
    pub subtask2: Subtask2Mode,
    pub wic: Option<PairTaskConfig>,
    pub gwcs: Option<PairTaskConfig>,
    pub scws: Option<PairTaskConfig>,
    pub sid: Option<PairTaskConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub inventory: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; none means available parallelism.
    pub workers: Option<usize>,
    pub corpora: CorporaConfig,
    pub stores: StoresConfig,
    pub profile: ProfileConfig,
    pub learn: LearnConfig,
    pub evaluate: EvaluateConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            inventory: None,
            out_dir: PathBuf::from("out"),
            seed: DEFAULT_SEED,
            workers: None,
            corpora: CorporaConfig::default(),
            stores: StoresConfig::default(),
            profile: ProfileConfig::default(),
            learn: LearnConfig::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

/// Parses an override value as TOML, falling back to a bare string.
fn override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(root: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| ConfigError::BadOverride(spec.to_string()))?;
    let parts: Vec<&str> = path.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::BadOverride(spec.to_string()));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table =
            entry.as_table_mut().ok_or_else(|| ConfigError::field(path.trim(), format!("{part} is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), override_value(raw.trim()));
    Ok(())
}

impl PipelineConfig {
    /// Reads an optional TOML file and applies `key.path=value` overrides in
    /// order. Relative paths in the file resolve against its directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let (mut root, base) = match path {
            Some(p) => {
                let text =
                    fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.to_path_buf(), source })?;
                let table: toml::Table =
                    text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
                (table, p.parent().map(Path::to_path_buf))
            }
            None => (toml::Table::new(), None),
        };
        let mut cfg: PipelineConfig = Self::from_table(root.clone())?;
        if let Some(base) = base.filter(|b| !b.as_os_str().is_empty()) {
            cfg.resolve_paths(&base);
            root = toml::Table::try_from(&cfg).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        }
        for spec in overrides {
            apply_override(&mut root, spec)?;
        }
        Self::from_table(root)
    }

    fn from_table(table: toml::Table) -> Result<Self, ConfigError> {
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().trim().to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let fix_all = |v: &mut Vec<PathBuf>| v.iter_mut().for_each(fix);
        self.inventory.iter_mut().for_each(fix);
        fix(&mut self.out_dir);
        fix_all(&mut self.corpora.train);
        self.corpora.validation.iter_mut().for_each(fix);
        self.corpora.test.values_mut().for_each(fix);
        fix_all(&mut self.stores.train);
        fix_all(&mut self.stores.validation);
        fix_all(&mut self.stores.glosses);
        self.stores.test.values_mut().for_each(fix_all);
        self.profile.scores.iter_mut().for_each(fix);
        self.profile.file.iter_mut().for_each(fix);
        self.evaluate.embeddings.iter_mut().for_each(fix);
        for task in [&mut self.evaluate.wic, &mut self.evaluate.gwcs, &mut self.evaluate.scws, &mut self.evaluate.sid]
            .into_iter()
            .flatten()
        {
            fix(&mut task.gold);
            fix_all(&mut task.stores);
        }
    }

    /// Every referenced input file with its field path.
    pub fn inputs(&self) -> Vec<(String, &Path)> {
        fn list<'a>(name: &str, v: &'a [PathBuf]) -> Vec<(String, &'a Path)> {
            v.iter().enumerate().map(|(i, p)| (format!("{name}[{i}]"), p.as_path())).collect()
        }
        let mut out: Vec<(String, &Path)> = Vec::new();
        if let Some(p) = &self.inventory {
            out.push(("inventory".into(), p));
        }
        out.extend(list("corpora.train", &self.corpora.train));
        if let Some(p) = &self.corpora.validation {
            out.push(("corpora.validation".into(), p));
        }
        out.extend(self.corpora.test.iter().map(|(k, p)| (format!("corpora.test.{k}"), p.as_path())));
        out.extend(list("stores.train", &self.stores.train));
        out.extend(list("stores.validation", &self.stores.validation));
        out.extend(list("stores.glosses", &self.stores.glosses));
        for (k, v) in &self.stores.test {
            out.extend(list(&format!("stores.test.{k}"), v));
        }
        if let Some(p) = &self.profile.scores {
            out.push(("profile.scores".into(), p));
        }
        if let Some(p) = &self.profile.file {
            out.push(("profile.file".into(), p));
        }
        if let Some(p) = &self.evaluate.embeddings {
            out.push(("evaluate.embeddings".into(), p));
        }
        for (name, task) in self.pair_tasks() {
            out.push((format!("evaluate.{name}.gold"), &task.gold));
            out.extend(list(&format!("evaluate.{name}.stores"), &task.stores));
        }
        out
    }

    fn pair_tasks(&self) -> Vec<(&'static str, &PairTaskConfig)> {
        [
            ("wic", &self.evaluate.wic),
            ("gwcs", &self.evaluate.gwcs),
            ("scws", &self.evaluate.scws),
            ("sid", &self.evaluate.sid),
        ]
        .into_iter()
        .filter_map(|(n, t)| t.as_ref().map(|t| (n, t)))
        .collect()
    }

    /// Checks field constraints and that every referenced file exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(t) = self.profile.t {
            if t.is_nan() || t <= 0.0 || !t.is_finite() {
                return Err(ConfigError::field("profile.t", format!("temperature must be positive, got {t}")));
            }
        }
        if self.workers == Some(0) {
            return Err(ConfigError::field("workers", "must be at least 1"));
        }
        if self.evaluate.usm_cutoff == Some(0) {
            return Err(ConfigError::field("evaluate.usm_cutoff", "must be at least 1"));
        }
        for name in self.stores.test.keys() {
            if !self.corpora.test.contains_key(name) {
                return Err(ConfigError::field(
                    format!("stores.test.{name}"),
                    "no corpus of that name in corpora.test",
                ));
            }
        }
        for (field, path) in self.inputs() {
            if !path.exists() {
                return Err(ConfigError::field(field, format!("file not found: {}", path.display())));
            }
        }
        Ok(())
    }

    /// Canonical JSON of the effective configuration. `workers` is left out
    /// because it never changes results.
    pub fn canonical_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("workers");
        }
        serde_json::to_string(&value).expect("config serializes")
    }

    /// SHA-256 over the canonical JSON.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&toml::to_string_pretty(self).map_err(|_| fmt::Error)?)
    }
}
