//! All-words WSD by nearest neighbour, and the most-frequent-sense baseline.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use rayon::prelude::*;

use super::metrics::F1Counts;
use super::{pooled_contexts, EvalError, EvalReport, Task};
use crate::corpus::{AnnotatedCorpus, AnnotationInstance};
use crate::embedstore::LayerStore;
use crate::inventory::{Level, Pos, SenseInventory};
use crate::profiles::SenseProfile;
use crate::senseindex::SenseIndex;

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub instance: String,
    pub pos: Pos,
    pub predicted: Option<String>,
    /// Gold ids at the level predictions are made.
    pub gold: BTreeSet<String>,
}

impl Prediction {
    pub fn is_correct(&self) -> bool {
        self.predicted.as_ref().is_some_and(|p| self.gold.contains(p))
    }
}

fn gold_at(inst: &AnnotationInstance, inventory: &SenseInventory, level: Level) -> Result<BTreeSet<String>, EvalError> {
    inst.gold_keys.iter().map(|k| Ok(inventory.to_level(k, level)?.to_string())).collect()
}

fn candidates<'a>(
    inst: &AnnotationInstance,
    inventory: &'a SenseInventory,
    level: Level,
) -> Result<Vec<&'a str>, EvalError> {
    let c = inventory.candidates_at(&inst.lemma, inst.pos, level);
    if c.is_empty() {
        return Err(EvalError::NoCandidates {
            instance: inst.id.clone(),
            lemma: inst.lemma.clone(),
            pos: inst.pos.to_string(),
        });
    }
    Ok(c)
}

/// 1NN prediction for every annotated instance, at the index's level.
pub fn wsd_predictions(
    corpus: &AnnotatedCorpus,
    contexts: &HashMap<String, Vec<f64>>,
    index: &SenseIndex,
    inventory: &SenseInventory,
) -> Result<Vec<Prediction>, EvalError> {
    let level = index.level();
    let instances: Vec<&AnnotationInstance> = corpus.annotated().collect();
    instances
        .par_iter()
        .map(|inst| {
            let ctx = contexts.get(&inst.id).ok_or_else(|| EvalError::MissingRecord(inst.id.clone()))?;
            let cands = candidates(inst, inventory, level)?;
            let (best, _) = index.disambiguate(ctx, &cands)?;
            Ok(Prediction {
                instance: inst.id.clone(),
                pos: inst.pos,
                predicted: Some(best.to_string()),
                gold: gold_at(inst, inventory, level)?,
            })
        })
        .collect()
}

/// Micro precision, recall and F1, overall and per POS.
pub fn score_predictions(task: Task, dataset: &str, predictions: &[Prediction]) -> EvalReport {
    let mut all = F1Counts::default();
    let mut by_pos: BTreeMap<String, F1Counts> = BTreeMap::new();
    for p in predictions {
        all.add(p.predicted.is_some(), p.is_correct());
        by_pos.entry(p.pos.to_string()).or_default().add(p.predicted.is_some(), p.is_correct());
    }
    let mut report = EvalReport::new(task, dataset, predictions.len())
        .with("f1", all.f1())
        .with("precision", all.precision())
        .with("recall", all.recall());
    report.per_pos = Some(by_pos.into_iter().map(|(k, c)| (k, c.f1())).collect());
    report
}

pub fn eval_wsd(
    corpus: &AnnotatedCorpus,
    store: &LayerStore,
    index: &SenseIndex,
    inventory: &SenseInventory,
    profile: &SenseProfile,
) -> Result<EvalReport, EvalError> {
    let keys: Vec<String> = corpus.annotated().map(|i| i.id.clone()).collect();
    let contexts = pooled_contexts(store, profile, &keys)?;
    let preds = wsd_predictions(corpus, &contexts, index, inventory)?;
    Ok(score_predictions(Task::Wsd, &corpus.name, &preds))
}

/// Sensekey annotation counts over a training corpus.
pub fn sense_frequencies(train: &AnnotatedCorpus) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for inst in &train.instances {
        for k in &inst.gold_keys {
            *counts.entry(k.as_str()).or_insert(0) += 1;
        }
    }
    counts
}

/// Most frequent training sense among the candidates; ties and unseen lemmas
/// fall back to the lowest sense number.
pub fn mfs_predictions(
    train: &AnnotatedCorpus,
    test: &AnnotatedCorpus,
    inventory: &SenseInventory,
) -> Result<Vec<Prediction>, EvalError> {
    let freq = sense_frequencies(train);
    test.annotated()
        .map(|inst| {
            let cands = inventory.candidates(&inst.lemma, inst.pos);
            let mut best: Option<(&str, usize)> = None;
            for c in cands {
                let n = freq.get(c).copied().unwrap_or(0);
                if best.is_none_or(|(_, b)| n > b) {
                    best = Some((c, n));
                }
            }
            Ok(Prediction {
                instance: inst.id.clone(),
                pos: inst.pos,
                predicted: best.map(|(c, _)| c.to_string()),
                gold: gold_at(inst, inventory, Level::Sensekey)?,
            })
        })
        .collect()
}

pub fn mfs_baseline(
    train: &AnnotatedCorpus,
    test: &AnnotatedCorpus,
    inventory: &SenseInventory,
) -> Result<EvalReport, EvalError> {
    let preds = mfs_predictions(train, test, inventory)?;
    Ok(score_predictions(Task::Mfs, &test.name, &preds))
}

/// Framework-style key file: `instance_id predicted_key` per line.
pub fn write_predictions(predictions: &[Prediction], mut w: impl Write) -> Result<(), EvalError> {
    for p in predictions {
        if let Some(k) = &p.predicted {
            writeln!(w, "{} {}", p.instance, k)?;
        }
    }
    Ok(())
}
