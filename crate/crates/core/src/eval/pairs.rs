//! Context-pair tasks: WiC, GWCS and SCWS.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{harmonic_mean, pearson, spearman, uncentered_pearson};
use super::readers::{GwcsInstance, ScwsPair, WicPair};
use super::{cosine, pooled_contexts, EvalError, EvalReport, Task};
use crate::embedstore::LayerStore;
use crate::inventory::{Pos, SenseInventory};
use crate::profiles::SenseProfile;
use crate::senseindex::SenseIndex;

/// 1NN sense for a word in context, at the index's level.
pub fn predict_sense<'a>(
    ctx: &[f64],
    lemma: &str,
    pos: Pos,
    index: &SenseIndex,
    inventory: &'a SenseInventory,
) -> Result<&'a str, EvalError> {
    let cands = inventory.candidates_at(lemma, pos, index.level());
    if cands.is_empty() {
        return Err(EvalError::NoCandidates {
            instance: String::new(),
            lemma: lemma.to_string(),
            pos: pos.to_string(),
        });
    }
    Ok(cands[index.best_candidate(ctx, &cands)?.0])
}

/// True when the target word gets the same sense in both contexts.
pub fn wic_predict(
    ctx1: &[f64],
    ctx2: &[f64],
    lemma: &str,
    pos: Pos,
    index: &SenseIndex,
    inventory: &SenseInventory,
) -> Result<bool, EvalError> {
    Ok(predict_sense(ctx1, lemma, pos, index, inventory)? == predict_sense(ctx2, lemma, pos, index, inventory)?)
}

/// Accuracy over labelled pairs plus the prediction for every pair.
pub fn eval_wic(
    pairs: &[WicPair],
    store: &LayerStore,
    index: &SenseIndex,
    inventory: &SenseInventory,
    profile: &SenseProfile,
) -> Result<(EvalReport, Vec<bool>), EvalError> {
    let keys: Vec<String> = pairs.iter().flat_map(|p| p.store_keys()).collect();
    let ctx = pooled_contexts(store, profile, &keys)?;
    let preds: Vec<bool> = pairs
        .par_iter()
        .map(|p| {
            let [k1, k2] = p.store_keys();
            wic_predict(&ctx[&k1], &ctx[&k2], &p.lemma, p.pos, index, inventory)
        })
        .collect::<Result<_, _>>()?;
    let labelled: Vec<(bool, bool)> = pairs.iter().zip(&preds).filter_map(|(p, &y)| p.label.map(|g| (g, y))).collect();
    let correct = labelled.iter().filter(|(g, y)| g == y).count();
    let acc = if labelled.is_empty() { 0.0 } else { 100.0 * correct as f64 / labelled.len() as f64 };
    Ok((EvalReport::new(Task::Wic, "wic", labelled.len()).with("accuracy", acc), preds))
}

/// Mean of sense similarity and context similarity.
pub fn combine_similarity(sim_wsd: f64, sim_ctx: f64) -> f64 {
    0.5 * (sim_wsd + sim_ctx)
}

/// Similarity of two words given their context vectors: the average of the
/// cosine between their predicted senses and the cosine between the
/// contexts themselves.
pub fn pair_similarity(
    (ctx1, word1, pos1): (&[f64], &str, Pos),
    (ctx2, word2, pos2): (&[f64], &str, Pos),
    index: &SenseIndex,
    inventory: &SenseInventory,
) -> Result<f64, EvalError> {
    let s1 = predict_sense(ctx1, word1, pos1, index, inventory)?;
    let s2 = predict_sense(ctx2, word2, pos2, index, inventory)?;
    Ok(combine_similarity(index.pair_similarity(s1, s2)?, cosine(ctx1, ctx2)))
}

/// Sub-task 1 system score.
pub fn gwcs_change(sim_a: f64, sim_b: f64) -> f64 {
    sim_b - sim_a
}

/// How sub-task 2 correlations are aggregated over the two contexts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subtask2Mode {
    /// One correlation over the A series followed by the B series.
    #[default]
    Flattened,
    /// Correlate each context separately and average the two.
    PerContext,
}

impl FromStr for Subtask2Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "flattened" | "flat" => Ok(Subtask2Mode::Flattened),
            "per_context" => Ok(Subtask2Mode::PerContext),
            _ => Err(format!("unknown sub-task 2 mode {s:?}")),
        }
    }
}

impl fmt::Display for Subtask2Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subtask2Mode::Flattened => "flattened",
            Subtask2Mode::PerContext => "per_context",
        })
    }
}

/// Context vectors of one GWCS instance: `[[A w1, A w2], [B w1, B w2]]`.
pub type GwcsContexts = [[Vec<f64>; 2]; 2];

/// `(sim^A, sim^B)` for one instance.
pub fn gwcs_similarities(
    inst: &GwcsInstance,
    ctx: &GwcsContexts,
    index: &SenseIndex,
    inventory: &SenseInventory,
) -> Result<(f64, f64), EvalError> {
    let sim = |c: &[Vec<f64>; 2]| {
        pair_similarity((&c[0], &inst.word1, inst.pos1), (&c[1], &inst.word2, inst.pos2), index, inventory)
    };
    Ok((sim(&ctx[0])?, sim(&ctx[1])?))
}

/// Sub-task 1 (uncentered Pearson of changes) and sub-task 2 (harmonic mean
/// of Spearman and Pearson of per-context similarities), all 0-100.
pub fn gwcs_report(
    instances: &[GwcsInstance],
    sims: &[(f64, f64)],
    mode: Subtask2Mode,
) -> Result<EvalReport, EvalError> {
    let sys_change: Vec<f64> = sims.iter().map(|&(a, b)| gwcs_change(a, b)).collect();
    let gold_change: Vec<f64> = instances.iter().map(GwcsInstance::gold_change).collect();
    let sub1 = uncentered_pearson(&sys_change, &gold_change)?;

    let (p, s) = match mode {
        Subtask2Mode::Flattened => {
            let sys: Vec<f64> = sims.iter().map(|s| s.0).chain(sims.iter().map(|s| s.1)).collect();
            let gold: Vec<f64> = instances.iter().map(|i| i.gold1).chain(instances.iter().map(|i| i.gold2)).collect();
            (pearson(&sys, &gold)?, spearman(&sys, &gold)?)
        }
        Subtask2Mode::PerContext => {
            let sa: Vec<f64> = sims.iter().map(|s| s.0).collect();
            let sb: Vec<f64> = sims.iter().map(|s| s.1).collect();
            let ga: Vec<f64> = instances.iter().map(|i| i.gold1).collect();
            let gb: Vec<f64> = instances.iter().map(|i| i.gold2).collect();
            (0.5 * (pearson(&sa, &ga)? + pearson(&sb, &gb)?), 0.5 * (spearman(&sa, &ga)? + spearman(&sb, &gb)?))
        }
    };
    Ok(EvalReport::new(Task::Gwcs, "gwcs", instances.len())
        .with("sub1_uncentered_pearson", 100.0 * sub1)
        .with("sub2_harmonic", 100.0 * harmonic_mean(p, s))
        .with("sub2_pearson", 100.0 * p)
        .with("sub2_spearman", 100.0 * s))
}

pub fn eval_gwcs(
    instances: &[GwcsInstance],
    store: &LayerStore,
    index: &SenseIndex,
    inventory: &SenseInventory,
    profile: &SenseProfile,
    mode: Subtask2Mode,
) -> Result<EvalReport, EvalError> {
    let keys: Vec<String> = instances.iter().flat_map(|i| i.store_keys().into_iter().flatten()).collect();
    let ctx = pooled_contexts(store, profile, &keys)?;
    let sims: Vec<(f64, f64)> = instances
        .par_iter()
        .map(|inst| {
            let k = inst.store_keys();
            let c: GwcsContexts = k.map(|pair| pair.map(|key| ctx[&key].clone()));
            gwcs_similarities(inst, &c, index, inventory)
        })
        .collect::<Result<_, _>>()?;
    gwcs_report(instances, &sims, mode)
}

/// Spearman (0-100) over all pairs and per POS pair. POS-pair groups whose
/// correlation is undefined are left out.
pub fn scws_report(pairs: &[ScwsPair], scores: &[f64]) -> Result<EvalReport, EvalError> {
    let gold: Vec<f64> = pairs.iter().map(|p| p.rating).collect();
    let rho = spearman(scores, &gold)?;
    let mut groups: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (p, &s) in pairs.iter().zip(scores) {
        let g = groups.entry(p.pos_pair()).or_default();
        g.0.push(s);
        g.1.push(p.rating);
    }
    let per_pos = groups.into_iter().filter_map(|(k, (s, g))| spearman(&s, &g).ok().map(|r| (k, 100.0 * r))).collect();
    let mut report = EvalReport::new(Task::Scws, "scws", pairs.len()).with("spearman", 100.0 * rho);
    report.per_pos = Some(per_pos);
    Ok(report)
}

pub fn eval_scws(
    pairs: &[ScwsPair],
    store: &LayerStore,
    index: &SenseIndex,
    inventory: &SenseInventory,
    profile: &SenseProfile,
) -> Result<EvalReport, EvalError> {
    let keys: Vec<String> = pairs.iter().flat_map(|p| p.store_keys()).collect();
    let ctx = pooled_contexts(store, profile, &keys)?;
    let scores: Vec<f64> = pairs
        .par_iter()
        .map(|p| {
            let [k1, k2] = p.store_keys();
            pair_similarity((&ctx[&k1], &p.word1, p.pos1), (&ctx[&k2], &p.word2, p.pos2), index, inventory)
        })
        .collect::<Result<_, _>>()?;
    scws_report(pairs, &scores)
}
