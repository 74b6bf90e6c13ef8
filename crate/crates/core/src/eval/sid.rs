//! Synset similarity against human ratings.

use std::collections::{HashMap, HashSet};

use super::metrics::pearson;
use super::readers::SidPair;
use super::svd::{rows_to_matrix, svd_reduce};
use super::{cosine, EvalError, EvalReport, Task};
use crate::senselearn::SenseEmbeddingSet;

pub const SID_DIM: usize = 300;

/// Pairs rated at most 1 or at least 3.
pub fn polarized(p: &SidPair) -> bool {
    p.rating <= 1.0 || p.rating >= 3.0
}

/// Pairs whose synsets were both annotated in training data.
pub fn observed(seen: &HashSet<String>) -> impl Fn(&SidPair) -> bool + '_ {
    move |p| seen.contains(&p.synset1) && seen.contains(&p.synset2)
}

/// A named pair filter reported alongside the full set.
pub struct SidSubset<'a> {
    pub name: String,
    pub filter: Box<dyn Fn(&SidPair) -> bool + 'a>,
}

impl<'a> SidSubset<'a> {
    pub fn new(name: impl Into<String>, filter: impl Fn(&SidPair) -> bool + 'a) -> Self {
        SidSubset { name: name.into(), filter: Box::new(filter) }
    }
}

/// Every vector of the set projected to `target_dim` dimensions by truncated
/// SVD over the whole matrix. Sets with `dim <= target_dim` pass through;
/// the rank is capped at the number of vectors.
pub fn reduce_set(
    set: &SenseEmbeddingSet,
    target_dim: usize,
    seed: u64,
) -> Result<HashMap<String, Vec<f64>>, EvalError> {
    if set.dim() <= target_dim {
        return Ok(set.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect());
    }
    let rows: Vec<&[f64]> = set.iter().map(|(_, v)| v).collect();
    let k = target_dim.min(rows.len());
    let reduced = svd_reduce(&rows_to_matrix(&rows)?, k, seed)?;
    Ok(set
        .ids()
        .zip(reduced.coords.row_iter())
        .map(|(id, row)| (id.to_string(), row.iter().copied().collect()))
        .collect())
}

/// Pearson (0-100) between reduced-space cosines and ratings, over all pairs
/// and over each subset.
pub fn eval_sid(
    pairs: &[SidPair],
    set: &SenseEmbeddingSet,
    target_dim: usize,
    seed: u64,
    subsets: &[SidSubset<'_>],
) -> Result<EvalReport, EvalError> {
    if let Some(missing) = pairs.iter().flat_map(|p| [&p.synset1, &p.synset2]).find(|id| !set.contains(id)) {
        return Err(EvalError::MissingSense(missing.clone()));
    }
    let vectors = reduce_set(set, target_dim, seed)?;
    let sims: Vec<f64> = pairs.iter().map(|p| cosine(&vectors[&p.synset1], &vectors[&p.synset2])).collect();
    let gold: Vec<f64> = pairs.iter().map(|p| p.rating).collect();

    let mut report = EvalReport::new(Task::Sid, "sid", pairs.len()).with("all", 100.0 * pearson(&sims, &gold)?);
    for subset in subsets {
        let (s, g): (Vec<f64>, Vec<f64>) =
            pairs.iter().zip(&sims).filter(|(p, _)| (subset.filter)(p)).map(|(p, s)| (*s, p.rating)).unzip();
        report.metrics.insert(format!("n_{}", subset.name), s.len() as f64);
        if let Ok(r) = pearson(&s, &g) {
            report.metrics.insert(subset.name.clone(), 100.0 * r);
        }
    }
    Ok(report)
}
