//! Sense embeddings: annotation centroids, propagation over WordNet
//! relations, gloss merging, synset conversion and import/export.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::AnnotatedCorpus;
use crate::embedstore::{
    pool_layers, read_str, read_u16, read_u32, read_u64, write_str, LayerStore, StoreError, GLOSS_PREFIX,
};
use crate::inventory::{InventoryError, Level, SenseInventory};
use crate::profiles::SenseProfile;

pub const SET_MAGIC: &[u8; 4] = b"LMSV";
pub const SET_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("no store record for instance {0}")]
    MissingRecord(String),
    #[error("unknown sense {0}")]
    UnknownSense(String),
    #[error("lexname {0} has no represented sense to propagate from")]
    UncoveredLexname(String),
    #[error("sense sets differ: {0}")]
    KeySetMismatch(String),
    #[error("expected a {expected} level set, got {got}")]
    LevelMismatch { expected: Level, got: Level },
    #[error("zero vector for {0}")]
    ZeroVector(String),
    #[error("non-finite value in vector for {0}")]
    NonFinite(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("dimension mismatch for {id}: expected {expected}, got {got}")]
    DimMismatch { id: String, expected: usize, got: usize },
    #[error("cannot propagate into an empty set")]
    EmptySet,
    #[error(transparent)]
    Inventory(InventoryError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<InventoryError> for LearnError {
    fn from(e: InventoryError) -> Self {
        match e {
            InventoryError::UnknownSense(k) => LearnError::UnknownSense(k),
            other => LearnError::Inventory(other),
        }
    }
}

/// How a sense got its vector. Ordered by pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Annotated,
    PropSynset,
    PropHypernym,
    PropLexname,
    GlossOnly,
}

impl Provenance {
    const ALL: [Provenance; 5] = [
        Provenance::Annotated,
        Provenance::PropSynset,
        Provenance::PropHypernym,
        Provenance::PropLexname,
        Provenance::GlossOnly,
    ];

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynsetMode {
    /// Map each sensekey annotation to its synset before averaging.
    Direct,
    /// Learn sensekeys; convert with [`to_synset_indirect`] at the end.
    IndirectSource,
}

impl FromStr for SynsetMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "direct" => Ok(SynsetMode::Direct),
            "indirect" | "indirect_source" => Ok(SynsetMode::IndirectSource),
            _ => Err(format!("unknown synset mode {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMode {
    Average,
    Concat,
}

impl FromStr for MergeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "average" | "avg" => Ok(MergeMode::Average),
            "concat" => Ok(MergeMode::Concat),
            _ => Err(format!("unknown merge mode {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Text,
    Binary,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(ExportFormat::Text),
            "binary" | "bin" => Ok(ExportFormat::Binary),
            _ => Err(format!("unknown export format {s:?}")),
        }
    }
}

/// Sense id to vector map with per-sense provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct SenseEmbeddingSet {
    pub level: Level,
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
    provenance: BTreeMap<String, Provenance>,
    pub gloss_merged: bool,
    pub profile_tag: String,
}

impl SenseEmbeddingSet {
    pub fn new(level: Level, dim: usize, profile_tag: impl Into<String>) -> Self {
        SenseEmbeddingSet {
            level,
            dim,
            vectors: BTreeMap::new(),
            provenance: BTreeMap::new(),
            gloss_merged: false,
            profile_tag: profile_tag.into(),
        }
    }

    /// Adds or replaces a vector.
    pub fn insert(
        &mut self,
        id: impl Into<String>,
        vector: Vec<f64>,
        provenance: Provenance,
    ) -> Result<(), LearnError> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(LearnError::DimMismatch { id, expected: self.dim, got: vector.len() });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite(id));
        }
        self.provenance.insert(id.clone(), provenance);
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.vectors.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn provenance(&self, id: &str) -> Option<Provenance> {
        self.provenance.get(id).copied()
    }

    /// Ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn provenance_map(&self) -> &BTreeMap<String, Provenance> {
        &self.provenance
    }

    pub fn provenance_counts(&self) -> BTreeMap<Provenance, usize> {
        let mut counts = BTreeMap::new();
        for p in self.provenance.values() {
            *counts.entry(*p).or_insert(0) += 1;
        }
        counts
    }

    /// Keeps only the given ids.
    pub fn retain(&mut self, mut keep: impl FnMut(&str) -> bool) {
        self.vectors.retain(|k, _| keep(k));
        self.provenance.retain(|k, _| keep(k));
    }
}

fn check_level(set: &SenseEmbeddingSet, expected: Level) -> Result<(), LearnError> {
    if set.level != expected {
        return Err(LearnError::LevelMismatch { expected, got: set.level });
    }
    Ok(())
}

/// Mean pooled context vector per annotated sense.
///
/// With `level = Synset` and [`SynsetMode::Direct`] each gold sensekey is
/// mapped to its synset before aggregation, and an instance counts once per
/// distinct synset. With [`SynsetMode::IndirectSource`] the result stays at
/// sensekey level and should be converted with [`to_synset_indirect`] once
/// propagation and merging are done.
pub fn learn_from_annotations(
    corpus: &AnnotatedCorpus,
    store: &LayerStore,
    profile: &SenseProfile,
    inventory: &SenseInventory,
    level: Level,
    synset_mode: SynsetMode,
) -> Result<SenseEmbeddingSet, LearnError> {
    let layers = store.header().layers();
    if layers != profile.layers() {
        return Err(StoreError::LayerCountMismatch { profile: profile.layers(), record: layers }.into());
    }
    let target_level = match (level, synset_mode) {
        (Level::Synset, SynsetMode::IndirectSource) => Level::Sensekey,
        _ => level,
    };

    // instance id -> target sense ids
    let mut targets: HashMap<&str, Vec<&str>> = HashMap::new();
    for inst in corpus.annotated() {
        let mut ids = Vec::with_capacity(inst.gold_keys.len());
        for key in &inst.gold_keys {
            if inventory.sense(key).is_none() {
                return Err(LearnError::UnknownSense(key.clone()));
            }
            let id = inventory.to_level(key, target_level)?;
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        targets.insert(inst.id.as_str(), ids);
    }

    let dim = store.header().dim();
    let mut sums: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    let mut seen: HashSet<&str> = HashSet::with_capacity(targets.len());
    store.scan(|record| {
        if let Some((&inst, ids)) = targets.get_key_value(record.key.as_str()) {
            if !seen.insert(inst) {
                return Ok(());
            }
            let pooled = pool_layers(record, profile)?;
            for id in ids {
                let (sum, n) = sums.entry(id).or_insert_with(|| (vec![0.0; dim], 0));
                sum.iter_mut().zip(&pooled).for_each(|(s, p)| *s += p);
                *n += 1;
            }
        }
        Ok::<_, LearnError>(())
    })?;

    if seen.len() < targets.len() {
        let missing =
            corpus.annotated().find(|i| !seen.contains(i.id.as_str())).map(|i| i.id.clone()).unwrap_or_default();
        return Err(LearnError::MissingRecord(missing));
    }

    let mut set = SenseEmbeddingSet::new(target_level, dim, profile.tag());
    for (id, (mut sum, n)) in sums {
        let n = n as f64;
        sum.iter_mut().for_each(|s| *s /= n);
        set.insert(id, sum, Provenance::Annotated)?;
    }
    Ok(set)
}

/// Running sum over a group of source senses.
struct GroupSum {
    sum: Vec<f64>,
    members: Vec<usize>,
}

impl GroupSum {
    fn mean(&self) -> Vec<f64> {
        let n = self.members.len() as f64;
        self.sum.iter().map(|s| s / n).collect()
    }
}

fn group_sums<'a>(
    dim: usize,
    sources: &[(&'a str, &[f64])],
    keys_of: impl Fn(usize) -> Vec<&'a str>,
) -> HashMap<&'a str, GroupSum> {
    let mut groups: HashMap<&str, GroupSum> = HashMap::new();
    for (i, (_, v)) in sources.iter().enumerate() {
        for key in keys_of(i) {
            let g = groups.entry(key).or_insert_with(|| GroupSum { sum: vec![0.0; dim], members: Vec::new() });
            g.sum.iter_mut().zip(v.iter()).for_each(|(s, x)| *s += x);
            g.members.push(i);
        }
    }
    groups
}

/// Uniform mean over the union of several groups' members.
fn union_mean(groups: &[&GroupSum], sources: &[(&str, &[f64])], dim: usize) -> Vec<f64> {
    let members: BTreeSet<usize> = groups.iter().flat_map(|g| g.members.iter().copied()).collect();
    let mut out = vec![0.0; dim];
    for &m in &members {
        out.iter_mut().zip(sources[m].1).for_each(|(o, x)| *o += x);
    }
    let n = members.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Fills every unrepresented sense in the inventory by averaging represented
/// senses that share, in order, a synset, a direct hypernym, or a lexname.
///
/// Each pass reads the represented set as it stood when the pass began, so
/// senses filled in one pass are sources for the next pass but not for
/// their own. Synset-level sets skip the synset pass.
pub fn propagate(set: SenseEmbeddingSet, inventory: &SenseInventory) -> Result<SenseEmbeddingSet, LearnError> {
    if set.is_empty() {
        return Err(LearnError::EmptySet);
    }
    let level = set.level;
    if let Some(unknown) = set.ids().find(|id| !inventory.contains(id, level)) {
        return Err(LearnError::UnknownSense(unknown.to_string()));
    }
    let mut set = set;
    let dim = set.dim;
    let universe = inventory.ids(level);

    if level == Level::Sensekey {
        let additions = {
            let sources: Vec<(&str, &[f64])> = set.iter().collect();
            let groups =
                group_sums(dim, &sources, |i| vec![inventory.relations(sources[i].0).expect("validated").synset_id]);
            let mut out = Vec::new();
            for id in universe.iter().filter(|id| !set.contains(id)) {
                let rel = inventory.relations(id)?;
                if let Some(g) = groups.get(rel.synset_id) {
                    out.push((id.to_string(), g.mean()));
                }
            }
            out
        };
        for (id, v) in additions {
            set.insert(id, v, Provenance::PropSynset)?;
        }
    }

    let additions = {
        let sources: Vec<(&str, &[f64])> = set.iter().collect();
        let groups = group_sums(dim, &sources, |i| {
            let rel = inventory.relations_at(sources[i].0, level).expect("validated");
            let mut hs: Vec<&str> = rel.hypernyms.iter().map(String::as_str).collect();
            hs.sort_unstable();
            hs.dedup();
            hs
        });
        let mut cache: HashMap<&[String], Option<Vec<f64>>> = HashMap::new();
        let mut out = Vec::new();
        for id in universe.iter().filter(|id| !set.contains(id)) {
            let rel = inventory.relations_at(id, level)?;
            let mean = cache.entry(rel.hypernyms).or_insert_with(|| {
                let hit: Vec<&GroupSum> = {
                    let mut hs: Vec<&str> = rel.hypernyms.iter().map(String::as_str).collect();
                    hs.sort_unstable();
                    hs.dedup();
                    hs.iter().filter_map(|h| groups.get(h)).collect()
                };
                match hit.len() {
                    0 => None,
                    1 => Some(hit[0].mean()),
                    _ => Some(union_mean(&hit, &sources, dim)),
                }
            });
            if let Some(v) = mean {
                out.push((id.to_string(), v.clone()));
            }
        }
        out
    };
    for (id, v) in additions {
        set.insert(id, v, Provenance::PropHypernym)?;
    }

    let (additions, uncovered) = {
        let sources: Vec<(&str, &[f64])> = set.iter().collect();
        let groups = group_sums(dim, &sources, |i| {
            vec![inventory.relations_at(sources[i].0, level).expect("validated").lexname]
        });
        let means: HashMap<&str, Vec<f64>> = groups.iter().map(|(k, g)| (*k, g.mean())).collect();
        let mut out = Vec::new();
        let mut uncovered = None;
        for id in universe.iter().filter(|id| !set.contains(id)) {
            let rel = inventory.relations_at(id, level)?;
            match means.get(rel.lexname) {
                Some(v) => out.push((id.to_string(), v.clone())),
                None => {
                    uncovered.get_or_insert_with(|| rel.lexname.to_string());
                }
            }
        }
        (out, uncovered)
    };
    if let Some(lexname) = uncovered {
        return Err(LearnError::UncoveredLexname(lexname));
    }
    for (id, v) in additions {
        set.insert(id, v, Provenance::PropLexname)?;
    }
    Ok(set)
}

/// One vector per sense read from the store's `gloss::<id>` records.
pub fn embed_glosses(
    inventory: &SenseInventory,
    store: &LayerStore,
    profile: &SenseProfile,
    level: Level,
) -> Result<SenseEmbeddingSet, LearnError> {
    let layers = store.header().layers();
    if layers != profile.layers() {
        return Err(StoreError::LayerCountMismatch { profile: profile.layers(), record: layers }.into());
    }
    let wanted: HashSet<&str> = inventory.ids(level).into_iter().collect();
    let mut set = SenseEmbeddingSet::new(level, store.header().dim(), profile.tag());
    store.scan(|record| {
        if let Some(id) = record.key.strip_prefix(GLOSS_PREFIX) {
            if wanted.contains(id) && !set.contains(id) {
                set.insert(id, pool_layers(record, profile)?, Provenance::GlossOnly)?;
            }
        }
        Ok::<_, LearnError>(())
    })?;
    if set.len() < wanted.len() {
        let missing = inventory.ids(level).into_iter().find(|id| !set.contains(id)).unwrap_or_default();
        return Err(LearnError::MissingRecord(format!("{GLOSS_PREFIX}{missing}")));
    }
    Ok(set)
}

fn unit(id: &str, v: &[f64]) -> Result<Vec<f64>, LearnError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(LearnError::ZeroVector(id.to_string()));
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Combines sense vectors with gloss vectors. Average mode returns the mean
/// of the two unit vectors without renormalizing; concat mode joins the two
/// unit vectors.
pub fn merge_gloss(
    base: &SenseEmbeddingSet,
    gloss: &SenseEmbeddingSet,
    mode: MergeMode,
) -> Result<SenseEmbeddingSet, LearnError> {
    check_level(gloss, base.level)?;
    if base.len() != gloss.len() {
        return Err(LearnError::KeySetMismatch(format!("{} vs {} senses", base.len(), gloss.len())));
    }
    if let Some(id) = base.ids().find(|id| !gloss.contains(id)) {
        return Err(LearnError::KeySetMismatch(format!("{id} has no gloss vector")));
    }
    if mode == MergeMode::Average && base.dim != gloss.dim {
        return Err(LearnError::DimMismatch { id: "gloss".into(), expected: base.dim, got: gloss.dim });
    }
    let dim = match mode {
        MergeMode::Average => base.dim,
        MergeMode::Concat => base.dim + gloss.dim,
    };
    let mut out = SenseEmbeddingSet::new(base.level, dim, base.profile_tag.clone());
    out.gloss_merged = true;
    for (id, v) in base.iter() {
        let a = unit(id, v)?;
        let b = unit(id, gloss.get(id).expect("checked key sets"))?;
        let merged = match mode {
            MergeMode::Average => a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect(),
            MergeMode::Concat => a.into_iter().chain(b).collect(),
        };
        out.insert(id, merged, base.provenance(id).expect("provenance tracked"))?;
    }
    Ok(out)
}

/// Synset vectors as the unweighted mean of member sensekey vectors. Synsets
/// with no member in the set are left out; provenance is the earliest pass
/// among the members used.
pub fn to_synset_indirect(
    set: &SenseEmbeddingSet,
    inventory: &SenseInventory,
) -> Result<SenseEmbeddingSet, LearnError> {
    check_level(set, Level::Sensekey)?;
    if let Some(unknown) = set.ids().find(|id| inventory.sense(id).is_none()) {
        return Err(LearnError::UnknownSense(unknown.to_string()));
    }
    let mut out = SenseEmbeddingSet::new(Level::Synset, set.dim, set.profile_tag.clone());
    out.gloss_merged = set.gloss_merged;
    for synset in inventory.synsets() {
        let members: Vec<&str> = inventory.members(&synset.id).into_iter().filter(|m| set.contains(m)).collect();
        if members.is_empty() {
            continue;
        }
        let mut mean = vec![0.0; set.dim];
        for m in &members {
            mean.iter_mut().zip(set.get(m).expect("filtered")).for_each(|(o, x)| *o += x);
        }
        let n = members.len() as f64;
        mean.iter_mut().for_each(|o| *o /= n);
        let prov = members.iter().filter_map(|m| set.provenance(m)).min().expect("members have provenance");
        out.insert(synset.id.clone(), mean, prov)?;
    }
    Ok(out)
}

/// Sidecar path for text exports: `<path>.provenance.json`.
pub fn provenance_sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".provenance.json");
    PathBuf::from(name)
}

pub fn write_provenance_json(set: &SenseEmbeddingSet, writer: impl Write) -> Result<(), LearnError> {
    serde_json::to_writer_pretty(writer, set.provenance_map())?;
    Ok(())
}

/// Writes a set. Text exports also write a provenance sidecar.
pub fn export_set(set: &SenseEmbeddingSet, path: impl AsRef<Path>, format: ExportFormat) -> Result<(), LearnError> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        ExportFormat::Text => {
            write_text(set, &mut w)?;
            w.flush()?;
            let side = BufWriter::new(File::create(provenance_sidecar(path))?);
            write_provenance_json(set, side)?;
        }
        ExportFormat::Binary => {
            write_binary(set, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// Reads a set written by [`export_set`], detecting the format.
pub fn import_set(path: impl AsRef<Path>) -> Result<SenseEmbeddingSet, LearnError> {
    let path = path.as_ref();
    let mut reader = BufReader::new(File::open(path)?);
    let is_binary = reader.fill_buf()?.starts_with(SET_MAGIC);
    if is_binary {
        return read_binary(reader);
    }
    let mut set = read_text(reader)?;
    let side = provenance_sidecar(path);
    if side.exists() {
        let prov: BTreeMap<String, Provenance> = serde_json::from_reader(BufReader::new(File::open(side)?))?;
        for (id, p) in prov {
            if set.contains(&id) {
                set.provenance.insert(id, p);
            }
        }
    }
    Ok(set)
}

/// word2vec-style text: `count dim` then `id v1 ... vd` with six decimals.
pub fn write_text(set: &SenseEmbeddingSet, mut w: impl Write) -> Result<(), LearnError> {
    writeln!(w, "{} {}", set.len(), set.dim)?;
    for (id, v) in set.iter() {
        w.write_all(id.as_bytes())?;
        for x in v {
            write!(w, " {x:.6}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses the text format. The level is inferred from the ids (sensekeys
/// contain `%`) and provenance defaults to annotated.
pub fn read_text(reader: impl BufRead) -> Result<SenseEmbeddingSet, LearnError> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.ok_or_else(|| LearnError::MalformedHeader("empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parse = |s: Option<&&str>| -> Result<usize, LearnError> {
        s.and_then(|s| s.parse().ok())
            .ok_or_else(|| LearnError::MalformedHeader(format!("expected `count dim`, got {header:?}")))
    };
    if fields.len() != 2 {
        return Err(LearnError::MalformedHeader(format!("expected `count dim`, got {header:?}")));
    }
    let (count, dim) = (parse(fields.first())?, parse(fields.get(1))?);
    let mut set = SenseEmbeddingSet::new(Level::Sensekey, dim, "");
    let mut level = None;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let id = parts.next().expect("non-empty line");
        let values: Vec<f64> = parts
            .map(|p| p.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| LearnError::MalformedHeader(format!("bad value for {id}: {e}")))?;
        if values.len() != dim {
            return Err(LearnError::DimMismatch { id: id.to_string(), expected: dim, got: values.len() });
        }
        level.get_or_insert(if id.contains('%') { Level::Sensekey } else { Level::Synset });
        set.insert(id, values, Provenance::Annotated)?;
    }
    if set.len() != count {
        return Err(LearnError::MalformedHeader(format!("header says {count} vectors, found {}", set.len())));
    }
    set.level = level.unwrap_or(Level::Sensekey);
    Ok(set)
}

fn level_code(level: Level) -> u8 {
    match level {
        Level::Sensekey => 0,
        Level::Synset => 1,
    }
}

/// Binary layout: `LMSV`, version u16, level u8, gloss_merged u8, dim u32,
/// count u64, profile tag; then per vector the id, a provenance byte and
/// `dim` little-endian f64 values.
pub fn write_binary(set: &SenseEmbeddingSet, mut w: impl Write) -> Result<(), LearnError> {
    w.write_all(SET_MAGIC)?;
    w.write_all(&SET_VERSION.to_le_bytes())?;
    w.write_all(&[level_code(set.level), set.gloss_merged as u8])?;
    w.write_all(&(set.dim as u32).to_le_bytes())?;
    w.write_all(&(set.len() as u64).to_le_bytes())?;
    write_str(&mut w, &set.profile_tag)?;
    for (id, v) in set.iter() {
        write_str(&mut w, id)?;
        w.write_all(&[set.provenance(id).expect("tracked").code()])?;
        for x in v {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary(mut r: impl Read) -> Result<SenseEmbeddingSet, LearnError> {
    let truncated = |e: io::Error| -> LearnError {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            LearnError::MalformedHeader("truncated file".into())
        } else {
            e.into()
        }
    };
    let truncated_store = |e: StoreError| -> LearnError {
        match e {
            StoreError::TruncatedFile => LearnError::MalformedHeader("truncated file".into()),
            other => other.into(),
        }
    };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != SET_MAGIC {
        return Err(LearnError::MalformedHeader("bad magic".into()));
    }
    let version = read_u16(&mut r).map_err(truncated_store)?;
    if version != SET_VERSION {
        return Err(LearnError::MalformedHeader(format!("unsupported version {version}")));
    }
    let mut flags = [0u8; 2];
    r.read_exact(&mut flags).map_err(truncated)?;
    let level = match flags[0] {
        0 => Level::Sensekey,
        1 => Level::Synset,
        c => return Err(LearnError::MalformedHeader(format!("bad level code {c}"))),
    };
    let dim = read_u32(&mut r).map_err(truncated_store)? as usize;
    let count = read_u64(&mut r).map_err(truncated_store)?;
    let tag = read_str(&mut r).map_err(truncated_store)?;
    let mut set = SenseEmbeddingSet::new(level, dim, tag);
    set.gloss_merged = flags[1] != 0;
    let mut buf = vec![0u8; dim * 8];
    for _ in 0..count {
        let id = read_str(&mut r).map_err(truncated_store)?;
        let mut code = [0u8; 1];
        r.read_exact(&mut code).map_err(truncated)?;
        let prov = Provenance::from_code(code[0])
            .ok_or_else(|| LearnError::MalformedHeader(format!("bad provenance code {}", code[0])))?;
        r.read_exact(&mut buf).map_err(truncated)?;
        let v = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        set.insert(id, v, prov)?;
    }
    Ok(set)
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Annotated => "annotated",
            Provenance::PropSynset => "prop_synset",
            Provenance::PropHypernym => "prop_hypernym",
            Provenance::PropLexname => "prop_lexname",
            Provenance::GlossOnly => "gloss_only",
        })
    }
}
