//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

pub mod checks;

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use sensekit::corpus::AnnotatedCorpus;
use sensekit::embedstore::{LayerRecord, LayerStore, StoreHeader};
use sensekit::fixtures;
use sensekit::inventory::{Level, Pos, SenseInventory};
use sensekit::profiles::SenseProfile;
use sensekit::senselearn::{Provenance, SenseEmbeddingSet};

pub fn pass_rank(p: Provenance) -> usize {
    match p {
        Provenance::Annotated => 0,
        Provenance::PropSynset => 1,
        Provenance::PropHypernym => 2,
        Provenance::PropLexname => 3,
        Provenance::GlossOnly => 4,
    }
}

fn related(inv: &SenseInventory, level: Level, pass: usize, a: &str, b: &str) -> bool {
    let ra = inv.relations_at(a, level).unwrap();
    let rb = inv.relations_at(b, level).unwrap();
    match pass {
        1 => ra.synset_id == rb.synset_id,
        2 => ra.hypernyms.iter().any(|h| rb.hypernyms.contains(h)),
        3 => ra.lexname == rb.lexname,
        _ => unreachable!(),
    }
}

/// Checks a propagated set against a brute-force reading of the algorithm:
/// annotated vectors are untouched, the key set equals the inventory, and
/// every inferred vector is the uniform mean of the senses that were
/// represented when its pass began and share the pass's relation, with no
/// earlier pass having had any source.
pub fn check_propagation(
    out: &SenseEmbeddingSet,
    learned: &SenseEmbeddingSet,
    inv: &SenseInventory,
) -> Result<(), String> {
    let level = out.level;
    let universe: BTreeSet<&str> = inv.ids(level).into_iter().collect();
    let keys: BTreeSet<&str> = out.ids().collect();
    if universe != keys {
        return Err(format!("coverage: {} of {} senses", keys.len(), universe.len()));
    }
    let first_pass = if level == Level::Sensekey { 1 } else { 2 };
    let all: Vec<(&str, usize)> = out.ids().map(|id| (id, pass_rank(out.provenance(id).unwrap()))).collect();
    for &(id, rank) in &all {
        if rank == 0 {
            if learned.get(id) != out.get(id) {
                return Err(format!("annotated vector of {id} changed"));
            }
            continue;
        }
        if !(first_pass..=3).contains(&rank) {
            return Err(format!("{id} has impossible provenance rank {rank}"));
        }
        if learned.contains(id) {
            return Err(format!("{id} was annotated but marked as inferred"));
        }
        for pass in first_pass..=rank {
            let sources: Vec<&str> =
                all.iter().filter(|(t, r)| *r < pass && related(inv, level, pass, id, t)).map(|(t, _)| *t).collect();
            if pass < rank && !sources.is_empty() {
                return Err(format!("{id} should have been filled in pass {pass}, not {rank}"));
            }
            if pass == rank {
                if sources.is_empty() {
                    return Err(format!("{id} filled in pass {rank} without sources"));
                }
                let mut mean = vec![0.0; out.dim()];
                for s in &sources {
                    mean.iter_mut().zip(out.get(s).unwrap()).for_each(|(m, x)| *m += x);
                }
                mean.iter_mut().for_each(|m| *m /= sources.len() as f64);
                let got = out.get(id).unwrap();
                if mean.iter().zip(got).any(|(a, b)| (a - b).abs() > 1e-12) {
                    return Err(format!("{id}: expected {mean:?}, got {got:?}"));
                }
            }
        }
    }
    Ok(())
}

/// Annotations for a random subset of senses that covers every lexname:
/// each chosen sense gets 1 to 3 instances with random small vectors.
pub fn random_annotations(
    rng: &mut impl Rng,
    inv: &SenseInventory,
    dim: usize,
    fraction: f64,
) -> (AnnotatedCorpus, LayerStore, SenseProfile) {
    let mut chosen: BTreeSet<String> = BTreeSet::new();
    let mut seeded: BTreeSet<String> = BTreeSet::new();
    for s in inv.senses() {
        let lex = inv.relations(&s.key).unwrap().lexname.to_string();
        if !seeded.contains(&lex) || rng.random_bool(fraction) {
            seeded.insert(lex);
            chosen.insert(s.key.clone());
        }
    }
    let mut instances = Vec::new();
    let mut records = Vec::new();
    for key in &chosen {
        let sense = inv.sense(key).unwrap();
        for _ in 0..rng.random_range(1..=3) {
            let id = format!("i{}", instances.len());
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-4i32..=4) as f64 / 2.0).collect();
            records.push((id.clone(), v));
            instances.push((id, sense.lemma.clone(), key.clone()));
        }
    }
    let refs: Vec<(&str, &str, Pos, Vec<&str>)> =
        instances.iter().map(|(id, lemma, key)| (id.as_str(), lemma.as_str(), Pos::Noun, vec![key.as_str()])).collect();
    let tuples: Vec<(&str, &str, Pos, &[&str])> = refs.iter().map(|(a, b, c, d)| (*a, *b, *c, d.as_slice())).collect();
    let corpus = fixtures::corpus("random", &tuples);
    (corpus, fixtures::constant_layer_store(3, dim, &records), fixtures::uniform_profile(3))
}

/// Store with explicit per-layer rows.
pub fn layered_store(layers: usize, dim: usize, records: Vec<(&str, Vec<Vec<f32>>)>) -> LayerStore {
    let header = StoreHeader::new("test", layers, dim).unwrap();
    let recs = records.into_iter().map(|(k, rows)| LayerRecord::from_rows(k, &rows).unwrap()).collect();
    LayerStore::in_memory(header, recs).unwrap()
}

pub fn cosine64(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Exhaustive f64 ranking: cosine descending, ties by ascending id.
pub fn brute_ranking(rows: &[(String, Vec<f64>)], q: &[f64]) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = rows.iter().map(|(id, v)| (id.clone(), cosine64(q, v))).collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    all
}

/// First candidate with the strictly largest cosine.
pub fn brute_disambiguate(rows: &HashMap<String, Vec<f64>>, q: &[f64], cands: &[String]) -> String {
    let mut best = (cands[0].clone(), f64::NEG_INFINITY);
    for c in cands {
        let s = cosine64(q, &rows[c]);
        if s > best.1 {
            best = (c.clone(), s);
        }
    }
    best.0
}

/// Singular values in descending order via the eigen-decomposition of AᵀA.
pub fn dense_singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let gram = a.transpose() * a;
    let eig = SymmetricEigen::new(gram);
    let mut s: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Optimal rank-k Frobenius reconstruction error.
pub fn optimal_tail_error(a: &DMatrix<f64>, k: usize) -> f64 {
    dense_singular_values(a)[k..].iter().map(|s| s * s).sum::<f64>().sqrt()
}
