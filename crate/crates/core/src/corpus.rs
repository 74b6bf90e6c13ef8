//! Sense-annotated corpora.
//!
//! Two input formats are supported: the XML + gold key layout used by the
//! standard all-words evaluation framework, and a JSONL format with one
//! sentence per line:
//!
//! ```text
//! {"tokens": ["How", "long", ...],
//!  "annotations": [{"id": "d000.s000.t000", "lemma": "long", "pos": "a",
//!                   "start": 1, "end": 1, "keys": ["long%3:00:02::"]}]}
//! ```
//!
//! Token spans are inclusive on both ends.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inventory::{Level, Pos, SenseInventory};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("gold keys reference unknown instance {0}")]
    UnknownInstanceInKeys(String),
    #[error("malformed key line {line}: {text:?}")]
    MalformedKeyLine { line: usize, text: String },
    #[error("malformed corpus JSONL at line {line}: {reason}")]
    MalformedJson { line: usize, reason: String },
    #[error("duplicate instance id {0}")]
    DuplicateInstance(String),
    #[error("instance {0} has an invalid token span")]
    InvalidSpan(String),
    #[error("{} instance(s) have no inventory candidates: {}", .0.len(), preview(.0))]
    NoCandidates(Vec<String>),
}

fn preview(items: &[String]) -> String {
    let mut out = items.iter().take(10).cloned().collect::<Vec<_>>().join(", ");
    if items.len() > 10 {
        out.push_str(", ...");
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSpan {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotationInstance {
    pub id: String,
    pub lemma: String,
    pub pos: Pos,
    pub span: TokenSpan,
    pub gold_keys: BTreeSet<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnnotatedCorpus {
    pub name: String,
    pub sentences: Vec<Vec<String>>,
    pub instances: Vec<AnnotationInstance>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorpusStats {
    /// Total number of gold sense labels (instances with several gold keys count once per key).
    pub annotations: usize,
    pub distinct_sensekeys: usize,
    pub distinct_synsets: usize,
    /// Distinct sensekeys over the inventory's sense count.
    pub coverage: f64,
}

impl AnnotatedCorpus {
    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn annotated(&self) -> impl Iterator<Item = &AnnotationInstance> {
        self.instances.iter().filter(|i| !i.gold_keys.is_empty())
    }

    /// Every gold key mentioned anywhere in the corpus.
    pub fn sense_keys(&self) -> HashSet<&str> {
        self.instances.iter().flat_map(|i| i.gold_keys.iter().map(String::as_str)).collect()
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = HashSet::with_capacity(self.instances.len());
        for inst in &self.instances {
            if !seen.insert(inst.id.as_str()) {
                return Err(CorpusError::DuplicateInstance(inst.id.clone()));
            }
            let ok = self
                .sentences
                .get(inst.span.sentence)
                .is_some_and(|s| inst.span.start <= inst.span.end && inst.span.end < s.len());
            if !ok {
                return Err(CorpusError::InvalidSpan(inst.id.clone()));
            }
        }
        Ok(())
    }

    /// Rejects instances whose lemma and part of speech have no candidates.
    pub fn check_candidates(&self, inventory: &SenseInventory) -> Result<(), CorpusError> {
        let missing: Vec<String> = self
            .instances
            .iter()
            .filter(|i| inventory.candidates(&i.lemma, i.pos).is_empty())
            .map(|i| format!("{} ({}/{})", i.id, i.lemma, i.pos))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CorpusError::NoCandidates(missing))
        }
    }

    /// Appends another corpus after this one; sentence indices of the
    /// appended instances are shifted.
    pub fn append(&mut self, other: AnnotatedCorpus) -> Result<(), CorpusError> {
        let offset = self.sentences.len();
        self.sentences.extend(other.sentences);
        for mut inst in other.instances {
            inst.span.sentence += offset;
            self.instances.push(inst);
        }
        self.validate()
    }

    /// Surface tokens covered by an instance.
    pub fn surface(&self, inst: &AnnotationInstance) -> &[String] {
        &self.sentences[inst.span.sentence][inst.span.start..=inst.span.end]
    }
}

/// Parses an evaluation-framework XML file and an optional gold key file.
///
/// With an inventory, instances without candidates are rejected as a group.
pub fn parse_framework_xml(
    data_xml: impl AsRef<Path>,
    gold_keys: Option<&Path>,
    inventory: Option<&SenseInventory>,
) -> Result<AnnotatedCorpus, CorpusError> {
    let path = data_xml.as_ref();
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .map(|n| n.trim_end_matches(".xml").trim_end_matches(".data").to_string())
        .unwrap_or_default();
    let xml = BufReader::new(File::open(path)?);
    let keys = gold_keys.map(File::open).transpose()?.map(BufReader::new);
    let corpus = read_framework(xml, keys, &name)?;
    if let Some(inv) = inventory {
        corpus.check_candidates(inv)?;
    }
    Ok(corpus)
}

pub fn read_framework<R: BufRead, K: BufRead>(
    xml: R,
    keys: Option<K>,
    name: &str,
) -> Result<AnnotatedCorpus, CorpusError> {
    let mut corpus = AnnotatedCorpus { name: name.to_string(), ..Default::default() };
    let mut reader = Reader::from_reader(xml);
    let mut buf = Vec::new();
    let xml_err = |e: &dyn std::fmt::Display, pos: u64| CorpusError::MalformedXml(format!("{e} (at byte {pos})"));

    // (id, lemma, pos) of the token currently open, None for `wf`
    let mut open: Option<Option<(String, String, Pos)>> = None;
    let mut text = String::new();
    let mut in_sentence = false;

    loop {
        let pos = reader.buffer_position();
        match reader.read_event_into(&mut buf) {
            Err(e) => return Err(xml_err(&e, pos)),
            Ok(Event::Eof) => break,
            Ok(Event::Start(e)) => match e.name().as_ref() {
                b"sentence" => {
                    corpus.sentences.push(Vec::new());
                    in_sentence = true;
                }
                tag @ (b"wf" | b"instance") => {
                    if !in_sentence {
                        return Err(CorpusError::MalformedXml(format!("token outside sentence at byte {pos}")));
                    }
                    let mut id = None;
                    let mut lemma = None;
                    let mut tag_pos = None;
                    for attr in e.attributes() {
                        let attr = attr.map_err(|e| xml_err(&e, pos))?;
                        let value = attr.unescape_value().map_err(|e| xml_err(&e, pos))?.into_owned();
                        match attr.key.as_ref() {
                            b"id" => id = Some(value),
                            b"lemma" => lemma = Some(value),
                            b"pos" => tag_pos = Some(value),
                            _ => {}
                        }
                    }
                    if tag == b"instance" {
                        let missing =
                            || CorpusError::MalformedXml(format!("instance missing attributes at byte {pos}"));
                        let id = id.ok_or_else(missing)?;
                        let lemma = lemma.ok_or_else(missing)?;
                        let tag_pos = tag_pos.ok_or_else(missing)?;
                        let p = Pos::parse_tag(&tag_pos).ok_or_else(|| {
                            CorpusError::MalformedXml(format!("instance {id} has unknown pos {tag_pos:?}"))
                        })?;
                        open = Some(Some((id, lemma, p)));
                    } else {
                        open = Some(None);
                    }
                    text.clear();
                }
                _ => {}
            },
            Ok(Event::Text(t)) => {
                if open.is_some() {
                    text.push_str(&t.unescape().map_err(|e| xml_err(&e, pos))?);
                }
            }
            Ok(Event::End(e)) => match e.name().as_ref() {
                b"sentence" => in_sentence = false,
                b"wf" | b"instance" => {
                    let Some(token) = open.take() else {
                        return Err(CorpusError::MalformedXml(format!("unbalanced token at byte {pos}")));
                    };
                    let sentence_idx = corpus.sentences.len() - 1;
                    let sentence = corpus.sentences.last_mut().expect("inside sentence");
                    let token_idx = sentence.len();
                    sentence.push(text.trim().to_string());
                    if let Some((id, lemma, pos)) = token {
                        corpus.instances.push(AnnotationInstance {
                            id,
                            lemma,
                            pos,
                            span: TokenSpan { sentence: sentence_idx, start: token_idx, end: token_idx },
                            gold_keys: BTreeSet::new(),
                        });
                    }
                }
                _ => {}
            },
            Ok(_) => {}
        }
        buf.clear();
    }
    corpus.validate()?;

    if let Some(keys) = keys {
        let index: HashMap<String, usize> =
            corpus.instances.iter().enumerate().map(|(i, inst)| (inst.id.clone(), i)).collect();
        for (line_no, line) in keys.lines().enumerate() {
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(id) = fields.next() else { continue };
            let gold: BTreeSet<String> = fields.map(str::to_string).collect();
            if gold.is_empty() {
                return Err(CorpusError::MalformedKeyLine { line: line_no + 1, text: line.clone() });
            }
            let &idx = index.get(id).ok_or_else(|| CorpusError::UnknownInstanceInKeys(id.to_string()))?;
            corpus.instances[idx].gold_keys.extend(gold);
        }
    }
    Ok(corpus)
}

#[derive(Serialize, Deserialize)]
struct SentenceLine {
    tokens: Vec<String>,
    #[serde(default)]
    annotations: Vec<AnnotationLine>,
}

#[derive(Serialize, Deserialize)]
struct AnnotationLine {
    id: String,
    lemma: String,
    pos: Pos,
    start: usize,
    end: usize,
    #[serde(default)]
    keys: Vec<String>,
}

pub fn read_corpus_jsonl(path: impl AsRef<Path>) -> Result<AnnotatedCorpus, CorpusError> {
    let path = path.as_ref();
    let name = path.file_stem().and_then(|n| n.to_str()).unwrap_or_default().to_string();
    corpus_from_jsonl(BufReader::new(File::open(path)?), &name)
}

pub fn corpus_from_jsonl(reader: impl BufRead, name: &str) -> Result<AnnotatedCorpus, CorpusError> {
    let mut corpus = AnnotatedCorpus { name: name.to_string(), ..Default::default() };
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SentenceLine = serde_json::from_str(&line)
            .map_err(|e| CorpusError::MalformedJson { line: line_no + 1, reason: e.to_string() })?;
        let sentence = corpus.sentences.len();
        corpus.sentences.push(parsed.tokens);
        for a in parsed.annotations {
            corpus.instances.push(AnnotationInstance {
                id: a.id,
                lemma: a.lemma,
                pos: a.pos,
                span: TokenSpan { sentence, start: a.start, end: a.end },
                gold_keys: a.keys.into_iter().collect(),
            });
        }
    }
    corpus.validate()?;
    Ok(corpus)
}

pub fn write_corpus_jsonl(corpus: &AnnotatedCorpus, writer: impl Write) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(writer);
    let mut by_sentence: Vec<Vec<&AnnotationInstance>> = vec![Vec::new(); corpus.sentences.len()];
    for inst in &corpus.instances {
        by_sentence[inst.span.sentence].push(inst);
    }
    for (tokens, instances) in corpus.sentences.iter().zip(by_sentence) {
        let line = SentenceLine {
            tokens: tokens.clone(),
            annotations: instances
                .into_iter()
                .map(|i| AnnotationLine {
                    id: i.id.clone(),
                    lemma: i.lemma.clone(),
                    pos: i.pos,
                    start: i.span.start,
                    end: i.span.end,
                    keys: i.gold_keys.iter().cloned().collect(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &line).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a corpus from `.jsonl` or framework `.xml`. For XML, the gold key file
/// defaults to the sibling `<name>.gold.key.txt` when present.
pub fn load_corpus(
    path: impl AsRef<Path>,
    gold_keys: Option<&Path>,
    inventory: Option<&SenseInventory>,
) -> Result<AnnotatedCorpus, CorpusError> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "jsonl") {
        let corpus = read_corpus_jsonl(path)?;
        if let Some(inv) = inventory {
            corpus.check_candidates(inv)?;
        }
        return Ok(corpus);
    }
    let sibling;
    let keys = match gold_keys {
        Some(k) => Some(k),
        None => {
            let file = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let stem = file.trim_end_matches(".xml").trim_end_matches(".data");
            sibling = path.with_file_name(format!("{stem}.gold.key.txt"));
            sibling.exists().then_some(sibling.as_path())
        }
    };
    parse_framework_xml(path, keys, inventory)
}

/// Keeps only sentences whose every instance has all gold keys inside `seen`.
pub fn restrict_to_seen(corpus: &AnnotatedCorpus, seen: &HashSet<String>) -> AnnotatedCorpus {
    let mut dropped = vec![false; corpus.sentences.len()];
    for inst in &corpus.instances {
        if inst.gold_keys.iter().any(|k| !seen.contains(k)) {
            dropped[inst.span.sentence] = true;
        }
    }
    let mut remap = vec![usize::MAX; corpus.sentences.len()];
    let mut sentences = Vec::new();
    for (i, tokens) in corpus.sentences.iter().enumerate() {
        if !dropped[i] {
            remap[i] = sentences.len();
            sentences.push(tokens.clone());
        }
    }
    let instances = corpus
        .instances
        .iter()
        .filter(|inst| !dropped[inst.span.sentence])
        .map(|inst| {
            let mut inst = inst.clone();
            inst.span.sentence = remap[inst.span.sentence];
            inst
        })
        .collect();
    AnnotatedCorpus { name: corpus.name.clone(), sentences, instances }
}

pub fn corpus_stats(corpus: &AnnotatedCorpus, inventory: &SenseInventory) -> CorpusStats {
    corpus_stats_combined(&[corpus], inventory)
}

/// Statistics over the union of several corpora.
pub fn corpus_stats_combined(corpora: &[&AnnotatedCorpus], inventory: &SenseInventory) -> CorpusStats {
    let mut annotations = 0;
    let mut keys: HashSet<&str> = HashSet::new();
    for corpus in corpora {
        for inst in &corpus.instances {
            annotations += inst.gold_keys.len();
            keys.extend(inst.gold_keys.iter().map(String::as_str));
        }
    }
    let synsets: HashSet<&str> = keys.iter().filter_map(|k| inventory.to_level(k, Level::Synset).ok()).collect();
    let coverage = if inventory.sense_count() == 0 { 0.0 } else { keys.len() as f64 / inventory.sense_count() as f64 };
    CorpusStats { annotations, distinct_sensekeys: keys.len(), distinct_synsets: synsets.len(), coverage }
}

#[cfg(test)]
mod tests {
    use super::*;

    const XML: &str = r#"<?xml version="1.0" encoding="UTF-8" ?>
<corpus lang="en" source="toy">
<text id="d000">
<sentence id="d000.s000">
<wf lemma="the" pos="DET">The</wf>
<instance id="d000.s000.t000" lemma="fire" pos="NOUN">fire</instance>
<wf lemma="be" pos="VERB">was</wf>
<instance id="d000.s000.t001" lemma="cold" pos="ADJ">cold</instance>
</sentence>
<sentence id="d000.s001">
<wf lemma="a" pos="DET">A</wf>
<instance id="d000.s001.t000" lemma="mouse" pos="NOUN">mouse</instance>
<wf lemma="&amp;" pos=".">&amp;</wf>
</sentence>
</text>
</corpus>
"#;

    const KEYS: &str = "d000.s000.t000 fire%1:12:00::\nd000.s000.t001 cold%3:00:01:: cold%3:00:02::\n";

    fn parsed() -> AnnotatedCorpus {
        read_framework(XML.as_bytes(), Some(KEYS.as_bytes()), "toy").unwrap()
    }

    #[test]
    fn framework_xml_instances_in_document_order() {
        let c = parsed();
        assert_eq!(c.sentences.len(), 2);
        assert_eq!(c.sentences[0], ["The", "fire", "was", "cold"]);
        assert_eq!(c.sentences[1][2], "&");
        let ids: Vec<_> = c.instances.iter().map(|i| i.id.as_str()).collect();
        assert_eq!(ids, ["d000.s000.t000", "d000.s000.t001", "d000.s001.t000"]);
        assert_eq!(c.instances[0].span, TokenSpan { sentence: 0, start: 1, end: 1 });
        assert_eq!(c.instances[1].pos, Pos::Adj);
        assert_eq!(c.instances[1].gold_keys.len(), 2);
        // no key line: unlabeled
        assert!(c.instances[2].gold_keys.is_empty());
    }

    #[test]
    fn minimal_document() {
        let xml = r#"<corpus><text><sentence><instance id="x.1" lemma="fire" pos="NOUN">fire</instance></sentence></text></corpus>"#;
        let c = read_framework(xml.as_bytes(), Some("x.1 fire%1:12:00::\n".as_bytes()), "min").unwrap();
        assert_eq!(c.instances.len(), 1);
        assert_eq!(c.instances[0].gold_keys.len(), 1);
    }

    #[test]
    fn key_for_unknown_instance() {
        let err = read_framework(XML.as_bytes(), Some("nope.t0 fire%1:12:00::\n".as_bytes()), "toy").unwrap_err();
        assert!(matches!(err, CorpusError::UnknownInstanceInKeys(id) if id == "nope.t0"));
    }

    #[test]
    fn broken_xml() {
        let err = read_framework::<_, &[u8]>("<corpus><sentence><wf>a</sentence>".as_bytes(), None, "x").unwrap_err();
        assert!(matches!(err, CorpusError::MalformedXml(_)));
    }

    #[test]
    fn jsonl_round_trip() {
        let c = parsed();
        let mut buf = Vec::new();
        write_corpus_jsonl(&c, &mut buf).unwrap();
        let back = corpus_from_jsonl(buf.as_slice(), "toy").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn restriction_drops_whole_sentences() {
        let c = parsed();
        let seen: HashSet<String> = ["fire%1:12:00::", "cold%3:00:01::"].iter().map(|s| s.to_string()).collect();
        let r = restrict_to_seen(&c, &seen);
        // cold has an unseen second gold key, so sentence 0 goes
        assert_eq!(r.sentences.len(), 1);
        assert_eq!(r.instances.len(), 1);
        assert_eq!(r.instances[0].id, "d000.s001.t000");
        assert_eq!(r.instances[0].span.sentence, 0);
        assert_eq!(restrict_to_seen(&r, &seen), r);

        let all: HashSet<String> = c.sense_keys().into_iter().map(str::to_string).collect();
        assert_eq!(restrict_to_seen(&c, &all), c);
    }

    #[test]
    fn empty_seen_set_empties_labelled_corpus() {
        let xml = r#"<corpus><text><sentence><instance id="a" lemma="fire" pos="NOUN">fire</instance></sentence>
<sentence><instance id="b" lemma="fire" pos="NOUN">fire</instance></sentence></text></corpus>"#;
        let c = read_framework(xml.as_bytes(), Some("a fire%1:12:00::\nb fire%1:11:00::\n".as_bytes()), "x").unwrap();
        let r = restrict_to_seen(&c, &HashSet::new());
        assert!(r.sentences.is_empty() && r.instances.is_empty());
    }

    #[test]
    fn stats_of_empty_corpus() {
        let inv = SenseInventory::default();
        let s = corpus_stats(&AnnotatedCorpus::default(), &inv);
        assert_eq!(s, CorpusStats { annotations: 0, distinct_sensekeys: 0, distinct_synsets: 0, coverage: 0.0 });
    }

    #[test]
    fn invalid_span_rejected() {
        let line = r#"{"tokens": ["a"], "annotations": [{"id": "x", "lemma": "a", "pos": "n", "start": 0, "end": 3, "keys": []}]}"#;
        assert!(matches!(corpus_from_jsonl(line.as_bytes(), "x"), Err(CorpusError::InvalidSpan(_))));
    }
}
