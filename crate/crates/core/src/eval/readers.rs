//! Gold-file readers for the pair and similarity tasks.
//!
//! Context vectors for these tasks live in a layer store under keys derived
//! from the instance id: `<id>#1` / `<id>#2` for WiC and SCWS (one per
//! sentence), and `<id>#A#1`, `<id>#A#2`, `<id>#B#1`, `<id>#B#2` for GWCS
//! (context, then word).

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::Deserialize;

use super::EvalError;
use crate::inventory::Pos;

#[derive(Clone, Debug, PartialEq)]
pub struct WicPair {
    /// 0-based data row.
    pub id: String,
    pub lemma: String,
    pub pos: Pos,
    pub sentence1: Vec<String>,
    pub sentence2: Vec<String>,
    pub index1: usize,
    pub index2: usize,
    pub label: Option<bool>,
}

impl WicPair {
    pub fn store_keys(&self) -> [String; 2] {
        [format!("{}#1", self.id), format!("{}#2", self.id)]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GwcsInstance {
    pub id: String,
    pub word1: String,
    pub pos1: Pos,
    pub word2: String,
    pub pos2: Pos,
    pub context1: String,
    pub context2: String,
    /// Mean human similarity in context 1 (A) and context 2 (B).
    pub gold1: f64,
    pub gold2: f64,
}

impl GwcsInstance {
    /// `[[A word1, A word2], [B word1, B word2]]`.
    pub fn store_keys(&self) -> [[String; 2]; 2] {
        let k = |c: &str, w: u8| format!("{}#{c}#{w}", self.id);
        [[k("A", 1), k("A", 2)], [k("B", 1), k("B", 2)]]
    }

    pub fn gold_change(&self) -> f64 {
        self.gold2 - self.gold1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScwsPair {
    pub id: String,
    pub word1: String,
    pub pos1: Pos,
    pub word2: String,
    pub pos2: Pos,
    pub context1: String,
    pub context2: String,
    pub rating: f64,
}

impl ScwsPair {
    pub fn store_keys(&self) -> [String; 2] {
        [format!("{}#1", self.id), format!("{}#2", self.id)]
    }

    /// POS pair label with the two tags in canonical order, e.g. `n-v`.
    pub fn pos_pair(&self) -> String {
        let (a, b) = (self.pos1.letter(), self.pos2.letter());
        let order = |p: char| "nvar".find(p).unwrap_or(4);
        if order(a) <= order(b) {
            format!("{a}-{b}")
        } else {
            format!("{b}-{a}")
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SidPair {
    pub synset1: String,
    pub synset2: String,
    pub rating: f64,
}

fn parse_pos(tag: &str, line: usize) -> Result<Pos, EvalError> {
    Pos::parse_tag(tag.trim()).ok_or_else(|| EvalError::Malformed { line, reason: format!("unknown POS {tag:?}") })
}

fn parse_label(s: &str, line: usize) -> Result<bool, EvalError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "t" | "true" | "1" => Ok(true),
        "f" | "false" | "0" => Ok(false),
        other => Err(EvalError::Malformed { line, reason: format!("bad label {other:?}") }),
    }
}

/// WiC TSV: `sentence1, sentence2, lemma, pos, "i-j", label`. The label
/// column may be absent. A header row starting with `sentence1` is skipped.
pub fn read_wic(reader: impl BufRead) -> Result<Vec<WicPair>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() || (i == 0 && line.starts_with("sentence1")) {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 && cols.len() != 6 {
            return Err(EvalError::Malformed {
                line: lineno,
                reason: format!("expected 5 or 6 columns, got {}", cols.len()),
            });
        }
        let (i1, i2) = cols[4]
            .split_once('-')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
            .ok_or_else(|| EvalError::Malformed { line: lineno, reason: format!("bad indices {:?}", cols[4]) })?;
        let tokens = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        let pair = WicPair {
            id: out.len().to_string(),
            lemma: cols[2].to_string(),
            pos: parse_pos(cols[3], lineno)?,
            sentence1: tokens(cols[0]),
            sentence2: tokens(cols[1]),
            index1: i1,
            index2: i2,
            label: cols.get(5).map(|l| parse_label(l, lineno)).transpose()?,
        };
        if pair.index1 >= pair.sentence1.len() || pair.index2 >= pair.sentence2.len() {
            return Err(EvalError::Malformed { line: lineno, reason: "target index outside sentence".into() });
        }
        out.push(pair);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct GwcsRow {
    id: String,
    word1: String,
    pos1: String,
    word2: String,
    pos2: String,
    context1: String,
    context2: String,
    gold1: f64,
    gold2: f64,
}

#[derive(Deserialize)]
struct ScwsRow {
    id: String,
    word1: String,
    pos1: String,
    word2: String,
    pos2: String,
    context1: String,
    context2: String,
    rating: f64,
}

fn csv_rows<T: for<'de> Deserialize<'de>>(reader: impl Read) -> impl Iterator<Item = (usize, Result<T, EvalError>)> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader)
        .into_deserialize::<T>()
        .enumerate()
        .map(|(i, r)| (i + 2, r.map_err(EvalError::from)))
}

/// GWCS CSV with header `id,word1,pos1,word2,pos2,context1,context2,gold1,gold2`.
pub fn read_gwcs(reader: impl Read) -> Result<Vec<GwcsInstance>, EvalError> {
    csv_rows::<GwcsRow>(reader)
        .map(|(line, r)| {
            let r = r?;
            Ok(GwcsInstance {
                pos1: parse_pos(&r.pos1, line)?,
                pos2: parse_pos(&r.pos2, line)?,
                id: r.id,
                word1: r.word1,
                word2: r.word2,
                context1: r.context1,
                context2: r.context2,
                gold1: r.gold1,
                gold2: r.gold2,
            })
        })
        .collect()
}

/// SCWS CSV with header `id,word1,pos1,word2,pos2,context1,context2,rating`.
pub fn read_scws(reader: impl Read) -> Result<Vec<ScwsPair>, EvalError> {
    csv_rows::<ScwsRow>(reader)
        .map(|(line, r)| {
            let r = r?;
            Ok(ScwsPair {
                pos1: parse_pos(&r.pos1, line)?,
                pos2: parse_pos(&r.pos2, line)?,
                id: r.id,
                word1: r.word1,
                word2: r.word2,
                context1: r.context1,
                context2: r.context2,
                rating: r.rating,
            })
        })
        .collect()
}

/// SID TSV: `synset1, synset2, rating`, optional header.
pub fn read_sid(reader: impl BufRead) -> Result<Vec<SidPair>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(EvalError::Malformed {
                line: i + 1,
                reason: format!("expected 3 columns, got {}", cols.len()),
            });
        }
        match cols[2].parse::<f64>() {
            Ok(rating) => out.push(SidPair { synset1: cols[0].to_string(), synset2: cols[1].to_string(), rating }),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(EvalError::Malformed { line: i + 1, reason: format!("bad rating: {e}") }),
        }
    }
    Ok(out)
}

pub fn open(path: impl AsRef<Path>) -> Result<BufReader<File>, EvalError> {
    Ok(BufReader::new(File::open(path)?))
}
