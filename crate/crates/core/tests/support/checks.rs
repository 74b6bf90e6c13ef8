//! Property bodies shared by the unit-level proptests and the acceptance
//! report. Each returns `Err` with a description on the first violation.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sensekit::eval::pairs::{gwcs_change, gwcs_report, gwcs_similarities, GwcsContexts, Subtask2Mode};
use sensekit::eval::readers::{GwcsInstance, SidPair};
use sensekit::eval::sid::{eval_sid, reduce_set};
use sensekit::eval::svd::svd_reduce;
use sensekit::fixtures::{self, synset};
use sensekit::inventory::{Level, Pos, SenseInventory};
use sensekit::profiles::{softmax_weights, LayerScores, ProbeMode, TEMPERATURE_SWEEP};
use sensekit::senseindex::SenseIndex;
use sensekit::senselearn::{
    learn_from_annotations, merge_gloss, propagate, to_synset_indirect, MergeMode, Provenance, SenseEmbeddingSet,
    SynsetMode,
};

use super::{
    brute_disambiguate, brute_ranking, check_propagation, cosine64, dense_singular_values, optimal_tail_error,
};

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        // NaN must fail the check, hence the negation.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

// Softmax profiles

/// Softmax written as w_i = 1 / Σ_j exp((s_j - s_i) / t), which never
/// overflows for the maximum and shares no code with the library.
pub fn softmax_oracle(s: &[f64], t: f64) -> Vec<f64> {
    s.iter().map(|si| 1.0 / s.iter().map(|sj| ((sj - si) / t).exp()).sum::<f64>()).collect()
}

fn weights(s: &[f64], t: f64) -> Result<Vec<f64>, String> {
    let scores = LayerScores { model_tag: "m".into(), mode: ProbeMode::Wsd, scores: s.to_vec() };
    softmax_weights(&scores, t).map(|p| p.weights).map_err(|e| e.to_string())
}

/// Sum to one, oracle agreement, monotonicity, concentration as t falls,
/// shift invariance and finiteness at the sharpest temperature.
pub fn check_softmax(s: &[f64], shift: f64) -> Result<(), String> {
    let mut prev_max = 0.0;
    for t in TEMPERATURE_SWEEP.iter().rev() {
        let w = weights(s, *t)?;
        ensure!(w.iter().all(|x| x.is_finite() && *x >= 0.0), "non-finite weight at t={t}: {w:?}");
        let total: f64 = w.iter().sum();
        ensure!((total - 1.0).abs() <= 1e-9, "weights sum to {total} at t={t}");
        for (x, o) in w.iter().zip(softmax_oracle(s, *t)) {
            ensure!((x - o).abs() <= 1e-9, "t={t}: {x} vs oracle {o}");
        }
        for i in 0..s.len() {
            for j in 0..s.len() {
                ensure!(s[i] <= s[j] || w[i] >= w[j], "not monotone at t={t}: s{i}>{j} but w {} < {}", w[i], w[j]);
            }
        }
        let max = w.iter().copied().fold(0.0, f64::max);
        ensure!(max >= prev_max - 1e-12, "max weight fell from {prev_max} to {max} at t={t}");
        prev_max = max;
        let shifted: Vec<f64> = s.iter().map(|x| x + shift).collect();
        let ws = weights(&shifted, *t)?;
        ensure!(w.iter().zip(&ws).all(|(a, b)| (a - b).abs() <= 1e-9), "shift by {shift} changed weights at t={t}");
    }
    Ok(())
}

// Propagation

pub fn prop_key(lemma: &str, n: u32) -> String {
    format!("{lemma}%1:00:{n:02}::")
}

/// root <- {a}, {d}, {c}; {e, b} on its own; {g} in a second lexname and
/// {f} under c's synset.
pub fn sensekey_fixture() -> SenseInventory {
    let k = prop_key;
    SenseInventory::from_records(vec![
        synset("00000001n", "noun.tops", &["entity"], &[], "that which exists", &[(&k("entity", 1), "entity", 1)]),
        synset("00000002n", "noun.tops", &["a"], &["00000001n"], "g", &[(&k("a", 2), "a", 1)]),
        synset("00000003n", "noun.tops", &["d"], &["00000001n"], "g", &[(&k("d", 3), "d", 1)]),
        synset("00000004n", "noun.tops", &["c"], &["00000001n"], "g", &[(&k("c", 4), "c", 1)]),
        synset("00000005n", "noun.tops", &["e", "b"], &[], "g", &[(&k("e", 5), "e", 1), (&k("b", 5), "b", 1)]),
        synset("00000006n", "noun.act", &["f"], &["00000004n"], "g", &[(&k("f", 6), "f", 1)]),
        synset("00000007n", "noun.act", &["g"], &[], "g", &[(&k("g", 7), "g", 1)]),
    ])
    .unwrap()
}

/// Synsets with two roots; p sits under both, x shares both roots with p.
pub fn synset_fixture() -> SenseInventory {
    let k = prop_key;
    SenseInventory::from_records(vec![
        synset("00000001n", "noun.tops", &["h1"], &[], "g", &[(&k("h1", 1), "h1", 1)]),
        synset("00000002n", "noun.tops", &["h2"], &[], "g", &[(&k("h2", 2), "h2", 1)]),
        synset("00000003n", "noun.tops", &["p"], &["00000001n", "00000002n"], "g", &[(&k("p", 3), "p", 1)]),
        synset("00000004n", "noun.tops", &["q"], &["00000001n"], "g", &[(&k("q", 4), "q", 1)]),
        synset("00000005n", "noun.tops", &["r"], &["00000002n"], "g", &[(&k("r", 5), "r", 1)]),
        synset(
            "00000006n",
            "noun.tops",
            &["x", "x2"],
            &["00000002n", "00000001n"],
            "g",
            &[(&k("x", 6), "x", 1), (&k("x2", 6), "x2", 1)],
        ),
        synset("00000007n", "noun.tops", &["y"], &["00000002n"], "g", &[(&k("y", 7), "y", 1)]),
    ])
    .unwrap()
}

pub fn set_of(level: Level, rows: &[(&str, [f64; 2])]) -> SenseEmbeddingSet {
    let mut s = SenseEmbeddingSet::new(level, 2, "test");
    for (id, v) in rows {
        s.insert(*id, v.to_vec(), Provenance::Annotated).unwrap();
    }
    s
}

/// A propagation input with hand-computed expectations.
pub struct PropagationCase {
    pub name: &'static str,
    pub inventory: SenseInventory,
    pub learned: SenseEmbeddingSet,
    pub expected: Vec<(String, [f64; 2], Provenance)>,
    pub size: usize,
}

pub fn propagation_cases() -> Vec<PropagationCase> {
    let k = prop_key;
    let sensekey = PropagationCase {
        name: "sensekey passes",
        inventory: sensekey_fixture(),
        learned: set_of(
            Level::Sensekey,
            &[(&k("a", 2), [1.0, 0.0]), (&k("d", 3), [0.0, 1.0]), (&k("e", 5), [0.0, 4.0]), (&k("g", 7), [3.0, 0.0])],
        ),
        expected: vec![
            // same synset as e
            (k("b", 5), [0.0, 4.0], Provenance::PropSynset),
            // shares the root hypernym with a and d only
            (k("c", 4), [0.5, 0.5], Provenance::PropHypernym),
            // c was filled during the hypernym pass, so f cannot use it there
            (k("f", 6), [3.0, 0.0], Provenance::PropLexname),
            // lexname mean over a, d, c, e, b
            (k("entity", 1), [0.3, 1.9], Provenance::PropLexname),
            (k("a", 2), [1.0, 0.0], Provenance::Annotated),
        ],
        size: 8,
    };
    let synsets = PropagationCase {
        name: "synset hypernyms",
        inventory: synset_fixture(),
        learned: set_of(
            Level::Synset,
            &[("00000003n", [3.0, 0.0]), ("00000004n", [0.0, 3.0]), ("00000005n", [3.0, 3.0])],
        ),
        expected: vec![
            // p belongs to both hypernym groups but counts once
            ("00000006n".into(), [2.0, 2.0], Provenance::PropHypernym),
            ("00000007n".into(), [3.0, 1.5], Provenance::PropHypernym),
            ("00000001n".into(), [2.2, 1.9], Provenance::PropLexname),
        ],
        size: 7,
    };

    // learned from contexts: a is the mean of three contexts but counts once
    let inv = sensekey_fixture();
    let c = fixtures::corpus(
        "toy",
        &[
            ("t1", "a", Pos::Noun, &["a%1:00:02::"]),
            ("t2", "a", Pos::Noun, &["a%1:00:02::"]),
            ("t3", "a", Pos::Noun, &["a%1:00:02::"]),
            ("t4", "d", Pos::Noun, &["d%1:00:03::"]),
            ("t5", "e", Pos::Noun, &["e%1:00:05::"]),
            ("t6", "g", Pos::Noun, &["g%1:00:07::"]),
        ],
    );
    let store = fixtures::constant_layer_store(
        2,
        2,
        &[
            ("t1".into(), vec![2.0, 0.0]),
            ("t2".into(), vec![0.0, 0.0]),
            ("t3".into(), vec![1.0, 0.0]),
            ("t4".into(), vec![0.0, 4.0]),
            ("t5".into(), vec![1.0, 1.0]),
            ("t6".into(), vec![1.0, 0.0]),
        ],
    );
    let learned =
        learn_from_annotations(&c, &store, &fixtures::uniform_profile(2), &inv, Level::Sensekey, SynsetMode::Direct)
            .unwrap();
    let contexts = PropagationCase {
        name: "learned from contexts",
        inventory: inv,
        learned,
        expected: vec![
            (k("a", 2), [1.0, 0.0], Provenance::Annotated),
            // uniform over the two source senses a=[1,0], d=[0,4]
            (k("c", 4), [0.5, 2.0], Provenance::PropHypernym),
            (k("b", 5), [1.0, 1.0], Provenance::PropSynset),
        ],
        size: 8,
    };
    vec![sensekey, synsets, contexts]
}

pub fn check_propagation_case(case: &PropagationCase) -> Result<(), String> {
    let out = propagate(case.learned.clone(), &case.inventory).map_err(|e| e.to_string())?;
    ensure!(out.len() == case.size, "{}: {} senses, expected {}", case.name, out.len(), case.size);
    for (id, want, prov) in &case.expected {
        let got = out.get(id).ok_or_else(|| format!("{}: {id} missing", case.name))?;
        ensure!(
            (got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12,
            "{}: {id} is {got:?}, expected {want:?}",
            case.name
        );
        ensure!(
            out.provenance(id) == Some(*prov),
            "{}: {id} has {:?}, expected {prov:?}",
            case.name,
            out.provenance(id)
        );
    }
    check_propagation(&out, &case.learned, &case.inventory).map_err(|e| format!("{}: {e}", case.name))
}

/// Learn from random annotations seeding every lexname, propagate at both
/// levels and compare with the brute-force reading.
pub fn check_random_propagation(seed: u64, synsets: usize, lexnames: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lexnames = lexnames.clamp(1, synsets);
    let inv = fixtures::random_inventory(&mut rng, synsets, lexnames);
    let (corpus, store, profile) = super::random_annotations(&mut rng, &inv, 3, 0.2);
    for level in [Level::Sensekey, Level::Synset] {
        let learned = learn_from_annotations(&corpus, &store, &profile, &inv, level, SynsetMode::Direct)
            .map_err(|e| e.to_string())?;
        let out = propagate(learned.clone(), &inv).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure!(out.len() == inv.ids(level).len(), "seed {seed}: coverage {} of {}", out.len(), inv.ids(level).len());
        check_propagation(&out, &learned, &inv).map_err(|e| format!("seed {seed} {level:?}: {e}"))?;
    }
    Ok(())
}

// kNN index

/// Random rows with some exact duplicates so the id tie rule matters.
pub fn random_rows(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<(String, Vec<f64>)> {
    let mut rows: Vec<(String, Vec<f64>)> = Vec::with_capacity(n);
    for i in 0..n {
        let v = if i > 0 && rng.random_bool(0.1) {
            rows[rng.random_range(0..i)].1.clone()
        } else {
            fixtures::gaussian_vector(rng, dim)
        };
        rows.push((format!("s{:05}", rng.random_range(0..1_000_000) * 10 + i % 10), v));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    rows.dedup_by(|a, b| a.0 == b.0);
    rows
}

pub fn index_from_rows(rows: &[(String, Vec<f64>)]) -> SenseIndex {
    let dim = rows[0].1.len();
    SenseIndex::from_rows(
        Level::Sensekey,
        rows.iter().map(|r| r.0.clone()).collect(),
        rows.iter().flat_map(|r| r.1.clone()).collect(),
        dim,
    )
    .unwrap()
}

/// A Gaussian query, or a scaled copy of a stored row to force exact ties.
pub fn random_query(rng: &mut impl Rng, rows: &[(String, Vec<f64>)], dim: usize) -> Vec<f64> {
    if rng.random_bool(0.3) {
        let r = &rows[rng.random_range(0..rows.len())].1;
        r.iter().map(|x| x * 2.0).collect()
    } else {
        fixtures::gaussian_vector(rng, dim)
    }
}

/// `match_topk`, its prefix property and `disambiguate` against the f64
/// brute-force oracle, including the id tie rule.
pub fn check_knn(seed: u64, n: usize, dim: usize, k: usize, queries: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = random_rows(&mut rng, n, dim);
    let idx = index_from_rows(&rows);
    let map: HashMap<String, Vec<f64>> = rows.iter().cloned().collect();
    for _ in 0..queries {
        let q = random_query(&mut rng, &rows, dim);
        let oracle = brute_ranking(&rows, &q);
        let got = idx.match_topk(&q, k).map_err(|e| e.to_string())?;
        let ids: Vec<&str> = got.iter().map(|g| g.0).collect();
        let want: Vec<&str> = oracle.iter().take(k).map(|o| o.0.as_str()).collect();
        ensure!(ids == want, "seed {seed} n={n} d={dim}: top-{k} {ids:?} vs oracle {want:?}");
        let longer = idx.match_topk(&q, k + 3).map_err(|e| e.to_string())?;
        ensure!(longer[..got.len()] == got[..], "seed {seed}: top-{k} is not a prefix of top-{}", k + 3);

        let cands: Vec<String> =
            (0..rng.random_range(1..6)).map(|_| rows[rng.random_range(0..rows.len())].0.clone()).collect();
        let (best, _) = idx.disambiguate(&q, &cands).map_err(|e| e.to_string())?;
        let want = brute_disambiguate(&map, &q, &cands);
        ensure!(best == want, "seed {seed}: disambiguate chose {best}, oracle {want}");
    }
    Ok(())
}

// Gloss merge

/// Average merge norm is at most one and exactly one for parallel parts;
/// concat doubles the dimension and keeps each part's direction.
pub fn check_merge(a: &[f64], b: &[f64]) -> Result<(), String> {
    let pair = |x: &[f64], y: &[f64]| {
        let mut s = SenseEmbeddingSet::new(Level::Synset, x.len(), "t");
        s.insert("s", x.to_vec(), Provenance::Annotated).unwrap();
        let mut g = SenseEmbeddingSet::new(Level::Synset, y.len(), "t");
        g.insert("s", y.to_vec(), Provenance::GlossOnly).unwrap();
        (s, g)
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();

    let (s, g) = pair(a, b);
    let m = merge_gloss(&s, &g, MergeMode::Average).map_err(|e| e.to_string())?;
    let v = m.get("s").unwrap();
    ensure!(norm(v) <= 1.0 + 1e-12, "merged norm {} exceeds 1", norm(v));
    let expect: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x / norm(a) + y / norm(b))).collect();
    ensure!(v.iter().zip(&expect).all(|(x, y)| (x - y).abs() < 1e-12), "average {v:?} vs {expect:?}");
    ensure!(norm(v) < 1.0 - 1e-12 || cosine64(a, b) > 1.0 - 1e-10, "non-parallel parts gave norm {}", norm(v));

    let scaled: Vec<f64> = a.iter().map(|x| x * 3.5).collect();
    let (s, g) = pair(a, &scaled);
    let m = merge_gloss(&s, &g, MergeMode::Average).map_err(|e| e.to_string())?;
    ensure!((norm(m.get("s").unwrap()) - 1.0).abs() < 1e-12, "parallel parts must give a unit vector");

    let (s, g) = pair(a, b);
    let c = merge_gloss(&s, &g, MergeMode::Concat).map_err(|e| e.to_string())?;
    ensure!(c.dim() == a.len() + b.len(), "concat dim {}", c.dim());
    let v = c.get("s").unwrap();
    ensure!((cosine64(&v[..a.len()], a) - 1.0).abs() < 1e-12, "concat changed the base direction");
    ensure!((cosine64(&v[a.len()..], b) - 1.0).abs() < 1e-12, "concat changed the gloss direction");
    Ok(())
}

// GWCS

pub const BANK1: &str = "bank%1:17:01::";
pub const BANK2: &str = "bank%1:14:00::";
pub const RUN1: &str = "run%2:38:00::";
pub const RUN2: &str = "run%2:41:00::";

/// Two nouns and two verbs, `bank` also with a synonym.
pub fn toy_inventory() -> SenseInventory {
    SenseInventory::from_records(vec![
        synset("00000001n", "noun.object", &["bank"], &[], "sloping land", &[(BANK1, "bank", 1)]),
        synset(
            "00000002n",
            "noun.group",
            &["bank", "depository"],
            &[],
            "a financial institution",
            &[(BANK2, "bank", 2), ("depository%1:14:00::", "depository", 1)],
        ),
        synset("00000003v", "verb.motion", &["run"], &[], "move fast", &[(RUN1, "run", 1)]),
        synset("00000004v", "verb.social", &["run"], &[], "be in charge of", &[(RUN2, "run", 2)]),
    ])
    .unwrap()
}

pub fn toy_index() -> SenseIndex {
    let mut set = SenseEmbeddingSet::new(Level::Sensekey, 3, "toy");
    for (k, v) in [
        (BANK1, [1.0, 0.0, 0.0]),
        (BANK2, [0.0, 1.0, 0.0]),
        ("depository%1:14:00::", [0.0, 1.0, 0.1]),
        (RUN1, [0.0, 0.0, 1.0]),
        (RUN2, [0.6, 0.8, 0.0]),
    ] {
        set.insert(k, v.to_vec(), Provenance::Annotated).unwrap();
    }
    SenseIndex::build(&set).unwrap()
}

pub fn gwcs_instance(id: &str, gold1: f64, gold2: f64) -> GwcsInstance {
    GwcsInstance {
        id: id.into(),
        word1: "bank".into(),
        pos1: Pos::Noun,
        word2: "run".into(),
        pos2: Pos::Verb,
        context1: String::new(),
        context2: String::new(),
        gold1,
        gold2,
    }
}

pub fn random_contexts(rng: &mut impl Rng) -> GwcsContexts {
    let mut v = || {
        let mut x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        x[0] += 1.5;
        x
    };
    [[v(), v()], [v(), v()]]
}

/// Swapping contexts A and B negates every change score exactly; swapping
/// the gold too leaves the sub-task 1 correlation unchanged, swapping only
/// the gold negates it.
pub fn check_gwcs_antisymmetry(seed: u64, n: usize) -> Result<(), String> {
    let inv = toy_inventory();
    let idx = toy_index();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let insts: Vec<GwcsInstance> =
        (0..n).map(|i| gwcs_instance(&i.to_string(), rng.random_range(0.0..6.0), rng.random_range(0.0..6.0))).collect();
    let ctx: Vec<GwcsContexts> = (0..n).map(|_| random_contexts(&mut rng)).collect();
    let mut sims = Vec::new();
    let mut swapped_sims = Vec::new();
    for (inst, c) in insts.iter().zip(&ctx) {
        let (a, b) = gwcs_similarities(inst, c, &idx, &inv).map_err(|e| e.to_string())?;
        let swapped = [c[1].clone(), c[0].clone()];
        let (sa, sb) = gwcs_similarities(inst, &swapped, &idx, &inv).map_err(|e| e.to_string())?;
        ensure!(gwcs_change(a, b) == -gwcs_change(sa, sb), "seed {seed}: change not negated for {}", inst.id);
        sims.push((a, b));
        swapped_sims.push((sa, sb));
    }
    let swapped_gold: Vec<GwcsInstance> = insts.iter().map(|i| gwcs_instance(&i.id, i.gold2, i.gold1)).collect();
    let sub1 = |r: &sensekit::eval::EvalReport| r.metric("sub1_uncentered_pearson").unwrap();
    match (
        gwcs_report(&insts, &sims, Subtask2Mode::Flattened),
        gwcs_report(&swapped_gold, &swapped_sims, Subtask2Mode::Flattened),
    ) {
        (Ok(r), Ok(s)) => {
            ensure!((sub1(&r) - sub1(&s)).abs() < 1e-9, "seed {seed}: swapping both changed sub-task 1");
            let flipped = gwcs_report(&swapped_gold, &sims, Subtask2Mode::Flattened).map_err(|e| e.to_string())?;
            ensure!(
                (sub1(&r) + sub1(&flipped)).abs() < 1e-9,
                "seed {seed}: swapping the gold did not negate sub-task 1"
            );
        }
        (Err(_), Err(_)) => {}
        _ => return Err(format!("seed {seed}: only one orientation was degenerate")),
    }
    Ok(())
}

// SVD

pub fn gaussian_matrix(rng: &mut impl Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(rng))
}

/// n×d matrix of exact rank r.
pub fn low_rank(rng: &mut impl Rng, n: usize, d: usize, r: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, n, r) * gaussian_matrix(rng, r, d)
}

/// Decaying spectrum so truncation is meaningful.
pub fn decaying(rng: &mut impl Rng, n: usize, d: usize) -> DMatrix<f64> {
    let mut a = gaussian_matrix(rng, n, d);
    for (j, mut col) in a.column_iter_mut().enumerate() {
        col *= 1.0 / (1.0 + j as f64).powf(0.7);
    }
    a
}

/// Randomized truncation error relative to the optimum; must stay within 1%.
pub fn check_svd_error(a: &DMatrix<f64>, k: usize, seed: u64) -> Result<f64, String> {
    let r = svd_reduce(a, k, seed).map_err(|e| e.to_string())?;
    let err = (a - r.reconstruct()).norm();
    let best = optimal_tail_error(a, k);
    let ratio = if best == 0.0 { 1.0 } else { err / best };
    ensure!(err <= best * 1.01 + 1e-9, "error {err} vs optimum {best}");
    let dense = dense_singular_values(a);
    for (got, want) in r.singular_values.iter().zip(&dense).take(k / 2) {
        ensure!((got - want).abs() <= 1e-4 * want, "singular value {got} vs {want}");
    }
    Ok(ratio)
}

/// With k equal to the rank every pairwise inner product survives.
pub fn check_inner_products(seed: u64, n: usize, d: usize, rank: usize) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = low_rank(&mut rng, n, d, rank);
    let r = svd_reduce(&a, rank, seed).map_err(|e| e.to_string())?;
    let g_in = &a * a.transpose();
    let g_out = &r.coords * r.coords.transpose();
    let worst = (g_in - g_out).abs().max();
    ensure!(worst < 1e-6, "inner products moved by {worst}");
    Ok(worst)
}

/// Synset set of n random rank-r rows in d dims, with 150 random pairs.
pub fn sid_fixture(rng: &mut impl Rng, n: usize, d: usize, rank: usize) -> (SenseEmbeddingSet, Vec<SidPair>) {
    let a = low_rank(rng, n, d, rank);
    let mut set = SenseEmbeddingSet::new(Level::Synset, d, "t");
    let ids: Vec<String> = (0..n).map(|i| format!("{i:08}n")).collect();
    for (id, row) in ids.iter().zip(a.row_iter()) {
        set.insert(id.clone(), row.iter().copied().collect(), Provenance::Annotated).unwrap();
    }
    let pairs = (0..150)
        .map(|_| SidPair {
            synset1: ids[rng.random_range(0..n)].clone(),
            synset2: ids[rng.random_range(0..n)].clone(),
            rating: rng.random_range(0.0..4.0),
        })
        .collect();
    (set, pairs)
}

/// Reducing low-rank embeddings to 300 dims leaves SID Pearson unchanged.
pub fn check_sid_lossless(seed: u64, n: usize, d: usize, rank: usize) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (set, pairs) = sid_fixture(&mut rng, n, d, rank);
    let reduced = eval_sid(&pairs, &set, 300, 42, &[]).map_err(|e| e.to_string())?;
    let raw = eval_sid(&pairs, &set, d, 42, &[]).map_err(|e| e.to_string())?;
    let diff = (reduced.metric("all").unwrap() - raw.metric("all").unwrap()).abs();
    ensure!(diff < 1e-6, "Pearson moved by {diff}");
    let dim = reduce_set(&set, 300, 42).map_err(|e| e.to_string())?.values().next().map(Vec::len).unwrap_or(0);
    ensure!(dim == n.min(300).min(d), "reduced dim {dim}");
    Ok(diff)
}

// Direct vs indirect synsets

/// With one annotation per sensekey, learning synsets directly equals
/// averaging learned sensekeys afterwards.
pub fn check_direct_indirect(seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv = fixtures::random_inventory(&mut rng, 25, 3);
    let mut rows = Vec::new();
    let mut inst = Vec::new();
    for (i, s) in inv.senses().enumerate() {
        let id = format!("i{i}");
        rows.push((id.clone(), fixtures::gaussian_vector(&mut rng, 6)));
        inst.push((id, s.lemma.clone(), s.key.clone()));
    }
    let tuples: Vec<(&str, &str, Pos, Vec<&str>)> =
        inst.iter().map(|(a, b, c)| (a.as_str(), b.as_str(), Pos::Noun, vec![c.as_str()])).collect();
    let refs: Vec<(&str, &str, Pos, &[&str])> = tuples.iter().map(|(a, b, c, d)| (*a, *b, *c, d.as_slice())).collect();
    let corpus = fixtures::corpus("one-each", &refs);
    let store = fixtures::constant_layer_store(2, 6, &rows);
    let profile = fixtures::uniform_profile(2);
    let learn = |level| learn_from_annotations(&corpus, &store, &profile, &inv, level, SynsetMode::Direct);
    let direct = learn(Level::Synset).map_err(|e| e.to_string())?;
    let keys = learn(Level::Sensekey).map_err(|e| e.to_string())?;
    let indirect = to_synset_indirect(&keys, &inv).map_err(|e| e.to_string())?;
    ensure!(direct.len() == indirect.len(), "seed {seed}: {} vs {} synsets", direct.len(), indirect.len());
    let mut worst = 0.0f64;
    for (id, v) in direct.iter() {
        let w = indirect.get(id).ok_or_else(|| format!("seed {seed}: {id} missing from indirect"))?;
        for (x, y) in v.iter().zip(w) {
            worst = worst.max((x - y).abs());
        }
    }
    ensure!(worst <= 1e-12, "seed {seed}: direct and indirect differ by {worst}");
    Ok(worst)
}
