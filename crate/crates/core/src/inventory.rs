//! Sense inventory: synsets, sensekeys and the relations used for propagation.
//!
//! The inventory is loaded from a JSONL file with one synset per line:
//!
//! ```text
//! {"id": "02330245n", "pos": "n", "lexname": "noun.animal", "lemmas": ["mouse"],
//!  "hypernyms": ["02329401n"], "gloss": "...",
//!  "senses": [{"key": "mouse%1:05:00::", "lemma": "mouse", "num": 1}]}
//! ```
//!
//! After loading, the inventory is immutable and can be shared across threads.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InventoryError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("dangling reference to synset {0}")]
    DanglingReference(String),
    #[error("duplicate identifier {0}")]
    Duplicate(String),
    #[error("unknown sense {0}")]
    UnknownSense(String),
}

/// Coarse part of speech. Adjective satellites are folded into `Adj`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pos {
    #[serde(rename = "n")]
    Noun,
    #[serde(rename = "v")]
    Verb,
    #[serde(rename = "a")]
    Adj,
    #[serde(rename = "r")]
    Adv,
}

impl Pos {
    pub const ALL: [Pos; 4] = [Pos::Noun, Pos::Verb, Pos::Adj, Pos::Adv];

    pub fn letter(self) -> char {
        match self {
            Pos::Noun => 'n',
            Pos::Verb => 'v',
            Pos::Adj => 'a',
            Pos::Adv => 'r',
        }
    }

    /// Accepts inventory letters (`n v a s r`), universal tags (`NOUN VERB ADJ ADV`)
    /// and sensekey ss_type digits (`1`..`5`).
    pub fn parse_tag(tag: &str) -> Option<Pos> {
        match tag {
            "n" | "N" | "NOUN" | "1" => Some(Pos::Noun),
            "v" | "V" | "VERB" | "2" => Some(Pos::Verb),
            "a" | "s" | "A" | "J" | "ADJ" | "3" | "5" => Some(Pos::Adj),
            "r" | "R" | "ADV" | "4" => Some(Pos::Adv),
            _ => None,
        }
    }

    /// Part of speech encoded in a sensekey (`lemma%ss_type:...`).
    pub fn from_sensekey(key: &str) -> Option<Pos> {
        let (_, rest) = key.rsplit_once('%')?;
        Pos::parse_tag(rest.get(..1)?)
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Pos {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pos::parse_tag(s).ok_or_else(|| format!("unknown part of speech {s:?}"))
    }
}

/// Granularity at which senses are represented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Sensekey,
    Synset,
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sensekey" | "sensekeys" | "sk" => Ok(Level::Sensekey),
            "synset" | "synsets" | "syn" => Ok(Level::Synset),
            _ => Err(format!("unknown level {s:?}")),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Sensekey => "sensekey",
            Level::Synset => "synset",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Synset {
    pub id: String,
    pub pos: Pos,
    pub lexname: String,
    pub lemmas: Vec<String>,
    pub hypernyms: Vec<String>,
    pub gloss: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SenseKey {
    pub key: String,
    pub lemma: String,
    pub synset_id: String,
    pub sense_number: u32,
}

/// One line of the inventory JSONL file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynsetRecord {
    pub id: String,
    pub pos: Pos,
    pub lexname: String,
    pub lemmas: Vec<String>,
    #[serde(default)]
    pub hypernyms: Vec<String>,
    pub gloss: String,
    pub senses: Vec<SenseRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SenseRecord {
    pub key: String,
    pub lemma: String,
    pub num: u32,
}

/// Relations of a sense used by propagation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Relations<'a> {
    pub synset_id: &'a str,
    pub hypernyms: &'a [String],
    pub lexname: &'a str,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SenseInventory {
    synsets: Vec<Synset>,
    synset_index: HashMap<String, usize>,
    senses: Vec<SenseKey>,
    sense_index: HashMap<String, usize>,
    members: Vec<Vec<usize>>,
    by_lemma_pos: HashMap<(String, Pos), Vec<usize>>,
}

impl SenseInventory {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, InventoryError> {
        let file = File::open(path)?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, InventoryError> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: SynsetRecord = serde_json::from_str(&line)
                .map_err(|e| InventoryError::MalformedRecord { line: i + 1, reason: e.to_string() })?;
            records.push((i + 1, record));
        }
        Self::build(records)
    }

    /// Builds an inventory from in-memory records, with the same validation as [`load`](Self::load).
    pub fn from_records(records: Vec<SynsetRecord>) -> Result<Self, InventoryError> {
        Self::build(records.into_iter().enumerate().map(|(i, r)| (i + 1, r)).collect())
    }

    fn build(records: Vec<(usize, SynsetRecord)>) -> Result<Self, InventoryError> {
        let mut inv = SenseInventory::default();
        let malformed =
            |line: usize, reason: &str| InventoryError::MalformedRecord { line, reason: reason.to_string() };

        for (line, rec) in records {
            if !rec.id.ends_with(rec.pos.letter()) {
                return Err(malformed(line, "pos does not match synset id suffix"));
            }
            if rec.lemmas.is_empty() {
                return Err(malformed(line, "synset without lemmas"));
            }
            if rec.gloss.trim().is_empty() {
                return Err(malformed(line, "empty gloss"));
            }
            if rec.senses.is_empty() {
                return Err(malformed(line, "synset without sensekeys"));
            }
            let synset_idx = inv.synsets.len();
            if inv.synset_index.insert(rec.id.clone(), synset_idx).is_some() {
                return Err(InventoryError::Duplicate(rec.id));
            }
            let mut member_idxs = Vec::with_capacity(rec.senses.len());
            for sense in rec.senses {
                if sense.num == 0 {
                    return Err(malformed(line, "sense number must be positive"));
                }
                let sense_idx = inv.senses.len();
                if inv.sense_index.insert(sense.key.clone(), sense_idx).is_some() {
                    return Err(InventoryError::Duplicate(sense.key));
                }
                inv.by_lemma_pos.entry((sense.lemma.clone(), rec.pos)).or_default().push(sense_idx);
                inv.senses.push(SenseKey {
                    key: sense.key,
                    lemma: sense.lemma,
                    synset_id: rec.id.clone(),
                    sense_number: sense.num,
                });
                member_idxs.push(sense_idx);
            }
            inv.members.push(member_idxs);
            inv.synsets.push(Synset {
                id: rec.id,
                pos: rec.pos,
                lexname: rec.lexname,
                lemmas: rec.lemmas,
                hypernyms: rec.hypernyms,
                gloss: rec.gloss,
            });
        }

        for synset in &inv.synsets {
            if let Some(h) = synset.hypernyms.iter().find(|h| !inv.synset_index.contains_key(*h)) {
                return Err(InventoryError::DanglingReference(h.clone()));
            }
        }

        let senses = &inv.senses;
        for list in inv.by_lemma_pos.values_mut() {
            list.sort_by(|&a, &b| {
                let (a, b) = (&senses[a], &senses[b]);
                a.sense_number.cmp(&b.sense_number).then_with(|| a.key.cmp(&b.key))
            });
        }
        Ok(inv)
    }

    pub fn synset_count(&self) -> usize {
        self.synsets.len()
    }

    pub fn sense_count(&self) -> usize {
        self.senses.len()
    }

    /// Number of distinct lemma strings over all sensekeys.
    pub fn lemma_count(&self) -> usize {
        self.senses.iter().map(|s| s.lemma.as_str()).collect::<BTreeSet<_>>().len()
    }

    pub fn lexnames(&self) -> BTreeSet<&str> {
        self.synsets.iter().map(|s| s.lexname.as_str()).collect()
    }

    pub fn synsets(&self) -> impl Iterator<Item = &Synset> {
        self.synsets.iter()
    }

    pub fn senses(&self) -> impl Iterator<Item = &SenseKey> {
        self.senses.iter()
    }

    pub fn synset(&self, id: &str) -> Option<&Synset> {
        self.synset_index.get(id).map(|&i| &self.synsets[i])
    }

    pub fn sense(&self, key: &str) -> Option<&SenseKey> {
        self.sense_index.get(key).map(|&i| &self.senses[i])
    }

    /// Identifiers of every sense at the given level, in file order.
    pub fn ids(&self, level: Level) -> Vec<&str> {
        match level {
            Level::Sensekey => self.senses.iter().map(|s| s.key.as_str()).collect(),
            Level::Synset => self.synsets.iter().map(|s| s.id.as_str()).collect(),
        }
    }

    pub fn contains(&self, id: &str, level: Level) -> bool {
        match level {
            Level::Sensekey => self.sense_index.contains_key(id),
            Level::Synset => self.synset_index.contains_key(id),
        }
    }

    /// Candidate sensekeys for a lemma and part of speech, ordered by ascending
    /// sense number then key. Lemmas are looked up verbatim, then lowercased
    /// with spaces mapped to underscores.
    pub fn candidates(&self, lemma: &str, pos: Pos) -> Vec<&str> {
        let found = self.by_lemma_pos.get(&(lemma.to_string(), pos)).or_else(|| {
            let normalized = lemma.to_lowercase().replace(' ', "_");
            self.by_lemma_pos.get(&(normalized, pos))
        });
        found.map(|idxs| idxs.iter().map(|&i| self.senses[i].key.as_str()).collect()).unwrap_or_default()
    }

    /// Candidates mapped to the requested level. At synset level the list is
    /// deduplicated, keeping the first occurrence.
    pub fn candidates_at(&self, lemma: &str, pos: Pos, level: Level) -> Vec<&str> {
        let keys = self.candidates(lemma, pos);
        match level {
            Level::Sensekey => keys,
            Level::Synset => {
                let mut out: Vec<&str> = Vec::with_capacity(keys.len());
                for key in keys {
                    let syn = self.senses[self.sense_index[key]].synset_id.as_str();
                    if !out.contains(&syn) {
                        out.push(syn);
                    }
                }
                out
            }
        }
    }

    pub fn synset_of(&self, key: &str) -> Result<&Synset, InventoryError> {
        let sense = self.sense(key).ok_or_else(|| InventoryError::UnknownSense(key.to_string()))?;
        Ok(&self.synsets[self.synset_index[&sense.synset_id]])
    }

    /// Maps a sense identifier to the given level. Synset ids pass through at
    /// synset level; sensekeys resolve to their synset.
    pub fn to_level<'a>(&'a self, id: &'a str, level: Level) -> Result<&'a str, InventoryError> {
        match level {
            Level::Sensekey => {
                self.sense(id).map(|s| s.key.as_str()).ok_or_else(|| InventoryError::UnknownSense(id.to_string()))
            }
            Level::Synset => {
                if let Some(syn) = self.synset(id) {
                    Ok(&syn.id)
                } else {
                    Ok(&self.synset_of(id)?.id)
                }
            }
        }
    }

    /// Sensekeys belonging to a synset, in inventory order.
    pub fn members(&self, synset_id: &str) -> Vec<&str> {
        self.synset_index
            .get(synset_id)
            .map(|&i| self.members[i].iter().map(|&s| self.senses[s].key.as_str()).collect())
            .unwrap_or_default()
    }

    /// Synset, direct hypernyms and lexname of a sensekey.
    pub fn relations(&self, key: &str) -> Result<Relations<'_>, InventoryError> {
        let synset = self.synset_of(key)?;
        Ok(Relations { synset_id: &synset.id, hypernyms: &synset.hypernyms, lexname: &synset.lexname })
    }

    /// Relations of a sense at either level (a synset id or a sensekey).
    pub fn relations_at(&self, id: &str, level: Level) -> Result<Relations<'_>, InventoryError> {
        let synset = match level {
            Level::Sensekey => self.synset_of(id)?,
            Level::Synset => self.synset(id).ok_or_else(|| InventoryError::UnknownSense(id.to_string()))?,
        };
        Ok(Relations { synset_id: &synset.id, hypernyms: &synset.hypernyms, lexname: &synset.lexname })
    }

    /// Gloss template fed to the encoder for a sense.
    ///
    /// Sensekey level: `"<lemma> - <synset lemmas> - <gloss>"`; synset level
    /// drops the leading lemma. Synset lemmas are joined with `", "` in
    /// inventory order and underscores become spaces.
    pub fn gloss_template(&self, id: &str, level: Level) -> Result<String, InventoryError> {
        let spaced = |s: &str| s.replace('_', " ");
        let (synset, lemma) = match level {
            Level::Sensekey => {
                let sense = self.sense(id).ok_or_else(|| InventoryError::UnknownSense(id.to_string()))?;
                (self.synset_of(id)?, Some(sense.lemma.as_str()))
            }
            Level::Synset => {
                let syn = self.to_level(id, Level::Synset)?;
                (self.synset(syn).expect("resolved synset"), None)
            }
        };
        let lemmas = synset.lemmas.iter().map(|l| spaced(l)).collect::<Vec<_>>().join(", ");
        Ok(match lemma {
            Some(lemma) => format!("{} - {} - {}", spaced(lemma), lemmas, synset.gloss),
            None => format!("{} - {}", lemmas, synset.gloss),
        })
    }
}
