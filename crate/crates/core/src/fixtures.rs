//! Synthetic inventories, corpora and stores for tests, demos and
//! benchmarks.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{AnnotatedCorpus, AnnotationInstance, TokenSpan};
use crate::embedstore::{LayerRecord, LayerStore, StoreHeader};
use crate::inventory::{Pos, SenseInventory, SenseRecord, SynsetRecord};
use crate::profiles::{ProfileKind, SenseProfile};

/// A synset record; POS comes from the id suffix.
pub fn synset(
    id: &str,
    lexname: &str,
    lemmas: &[&str],
    hypernyms: &[&str],
    gloss: &str,
    senses: &[(&str, &str, u32)],
) -> SynsetRecord {
    let pos = Pos::parse_tag(&id[id.len() - 1..]).expect("id ends in a POS letter");
    SynsetRecord {
        id: id.to_string(),
        pos,
        lexname: lexname.to_string(),
        lemmas: lemmas.iter().map(|s| s.to_string()).collect(),
        hypernyms: hypernyms.iter().map(|s| s.to_string()).collect(),
        gloss: gloss.to_string(),
        senses: senses
            .iter()
            .map(|(k, l, n)| SenseRecord { key: k.to_string(), lemma: l.to_string(), num: *n })
            .collect(),
    }
}

/// Random noun inventory: `synsets` synsets spread over `lexnames` lexnames
/// (every lexname used at least once), 1 to 3 lemmas each drawn from a
/// shared pool, and 0 to 2 direct hypernyms among earlier synsets.
pub fn random_inventory(rng: &mut impl Rng, synsets: usize, lexnames: usize) -> SenseInventory {
    assert!(lexnames >= 1 && synsets >= lexnames, "need at least one synset per lexname");
    let pool = (synsets / 2).max(2);
    let mut sense_numbers = vec![0u32; pool];
    let mut records = Vec::with_capacity(synsets);
    for i in 0..synsets {
        let id = format!("{:08}n", i + 1);
        let lex = if i < lexnames { i } else { rng.random_range(0..lexnames) };
        let mut lemmas = BTreeSet::new();
        for _ in 0..rng.random_range(1..=3) {
            lemmas.insert(rng.random_range(0..pool));
        }
        let mut hypernyms = BTreeSet::new();
        if i > 0 {
            for _ in 0..rng.random_range(0..=2) {
                hypernyms.insert(format!("{:08}n", rng.random_range(0..i) + 1));
            }
        }
        let senses = lemmas
            .iter()
            .map(|&l| {
                sense_numbers[l] += 1;
                SenseRecord { key: format!("w{l}%1:{lex:02}:{i:02}::"), lemma: format!("w{l}"), num: sense_numbers[l] }
            })
            .collect();
        records.push(SynsetRecord {
            id,
            pos: Pos::Noun,
            lexname: format!("noun.lex{lex}"),
            lemmas: lemmas.iter().map(|l| format!("w{l}")).collect(),
            hypernyms: hypernyms.into_iter().collect(),
            gloss: format!("gloss of synset {i}"),
            senses,
        });
    }
    SenseInventory::from_records(records).expect("generated inventory is valid")
}

pub fn gaussian_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Store whose records carry the given vector on every layer.
pub fn constant_layer_store(layers: usize, dim: usize, records: &[(String, Vec<f64>)]) -> LayerStore {
    let header = StoreHeader::new("fixture", layers, dim).expect("valid header");
    let recs = records
        .iter()
        .map(|(k, v)| {
            let row: Vec<f32> = v.iter().map(|&x| x as f32).collect();
            LayerRecord::from_rows(k.clone(), &vec![row; layers]).expect("valid record")
        })
        .collect();
    LayerStore::in_memory(header, recs).expect("valid store")
}

/// Uniform profile over `layers` layers.
pub fn uniform_profile(layers: usize) -> SenseProfile {
    SenseProfile {
        model_tag: "fixture".into(),
        kind: ProfileKind::Wsd,
        temperature: None,
        weights: vec![1.0 / layers as f64; layers],
    }
}

/// Corpus with one single-token sentence per instance.
pub fn corpus(name: &str, instances: &[(&str, &str, Pos, &[&str])]) -> AnnotatedCorpus {
    let mut c = AnnotatedCorpus { name: name.to_string(), ..Default::default() };
    for (i, (id, lemma, pos, gold)) in instances.iter().enumerate() {
        c.sentences.push(vec![lemma.to_string()]);
        c.instances.push(AnnotationInstance {
            id: id.to_string(),
            lemma: lemma.to_string(),
            pos: *pos,
            span: TokenSpan { sentence: i, start: 0, end: 0 },
            gold_keys: gold.iter().map(|g| g.to_string()).collect(),
        });
    }
    c
}
