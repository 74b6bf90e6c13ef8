//! Uninformed sense matching: every sense in the index competes.

use std::collections::BTreeSet;

use rayon::prelude::*;

use super::metrics::{rank_metrics_from_ranks, F1Counts};
use super::{pooled_contexts, EvalError, EvalReport, Task};
use crate::corpus::{AnnotatedCorpus, AnnotationInstance};
use crate::embedstore::LayerStore;
use crate::inventory::SenseInventory;
use crate::profiles::SenseProfile;
use crate::senseindex::SenseIndex;

pub const USM_K: usize = 5;

/// Rank of the best-ranked gold sense over the whole index, `None` when no
/// gold sense is indexed or the rank exceeds `cutoff`.
pub fn best_gold_rank(
    ctx: &[f64],
    inst: &AnnotationInstance,
    index: &SenseIndex,
    inventory: &SenseInventory,
    cutoff: Option<usize>,
) -> Result<Option<usize>, EvalError> {
    let gold: BTreeSet<&str> =
        inst.gold_keys.iter().map(|k| inventory.to_level(k, index.level())).collect::<Result<_, _>>()?;
    let mut best: Option<usize> = None;
    for g in gold.into_iter().filter(|g| index.contains(g)) {
        let r = index.rank_of(ctx, g)?;
        best = Some(best.map_or(r, |b| b.min(r)));
    }
    Ok(best.filter(|r| cutoff.is_none_or(|c| *r <= c)))
}

/// F1 (top-1), P@5 and MRR, all 0-100.
pub fn eval_usm(
    corpus: &AnnotatedCorpus,
    store: &LayerStore,
    index: &SenseIndex,
    inventory: &SenseInventory,
    profile: &SenseProfile,
    cutoff: Option<usize>,
) -> Result<EvalReport, EvalError> {
    let instances: Vec<&AnnotationInstance> = corpus.annotated().collect();
    let keys: Vec<String> = instances.iter().map(|i| i.id.clone()).collect();
    let contexts = pooled_contexts(store, profile, &keys)?;
    let ranks: Vec<Option<usize>> = instances
        .par_iter()
        .map(|inst| best_gold_rank(&contexts[&inst.id], inst, index, inventory, cutoff))
        .collect::<Result<_, _>>()?;
    Ok(usm_report(&corpus.name, &ranks))
}

pub fn usm_report(dataset: &str, ranks: &[Option<usize>]) -> EvalReport {
    let mut f1 = F1Counts::default();
    for r in ranks {
        f1.add(true, *r == Some(1));
    }
    let rm = rank_metrics_from_ranks(ranks, USM_K);
    EvalReport::new(Task::Usm, dataset, ranks.len()).with("f1", f1.f1()).with("p@5", rm.p_at_k).with("mrr", rm.mrr)
}
