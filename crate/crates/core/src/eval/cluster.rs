//! Silhouette coefficients under cosine distance.

use std::collections::BTreeMap;

use super::{cosine, EvalError};

/// Mean silhouette coefficient with distance `1 - cos`.
///
/// Points in singleton clusters score 0. Needs at least two clusters and
/// two points.
pub fn silhouette<V: AsRef<[f64]>, L: Ord + Clone>(points: &[V], labels: &[L]) -> Result<f64, EvalError> {
    Ok(silhouette_samples(points, labels)?.iter().sum::<f64>() / points.len() as f64)
}

/// Per-point silhouette coefficients.
pub fn silhouette_samples<V: AsRef<[f64]>, L: Ord + Clone>(points: &[V], labels: &[L]) -> Result<Vec<f64>, EvalError> {
    if points.len() != labels.len() {
        return Err(EvalError::DegenerateClustering(format!("{} points, {} labels", points.len(), labels.len())));
    }
    let mut ids: BTreeMap<L, usize> = BTreeMap::new();
    for l in labels {
        let next = ids.len();
        ids.entry(l.clone()).or_insert(next);
    }
    let groups = ids.len();
    if groups < 2 || points.len() < 2 {
        return Err(EvalError::DegenerateClustering(format!(
            "need at least 2 clusters and 2 points, got {groups} and {}",
            points.len()
        )));
    }
    let label_of: Vec<usize> = labels.iter().map(|l| ids[l]).collect();
    let mut sizes = vec![0usize; groups];
    label_of.iter().for_each(|&g| sizes[g] += 1);

    let n = points.len();
    let mut out = Vec::with_capacity(n);
    let mut dist_sum = vec![0.0; groups];
    for i in 0..n {
        dist_sum.iter_mut().for_each(|d| *d = 0.0);
        for j in 0..n {
            if i != j {
                dist_sum[label_of[j]] += 1.0 - cosine(points[i].as_ref(), points[j].as_ref());
            }
        }
        let own = label_of[i];
        if sizes[own] == 1 {
            out.push(0.0);
            continue;
        }
        let a = dist_sum[own] / (sizes[own] - 1) as f64;
        let b = (0..groups).filter(|&g| g != own).map(|g| dist_sum[g] / sizes[g] as f64).fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        out.push(if denom == 0.0 { 0.0 } else { (b - a) / denom });
    }
    Ok(out)
}
