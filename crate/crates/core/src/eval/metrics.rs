//! Correlations, ranking metrics and F1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    Pearson,
    Spearman,
    Uncentered,
}

impl fmt::Display for CorrelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrelationKind::Pearson => "pearson",
            CorrelationKind::Spearman => "spearman",
            CorrelationKind::Uncentered => "uncentered",
        })
    }
}

impl FromStr for CorrelationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pearson" => Ok(CorrelationKind::Pearson),
            "spearman" => Ok(CorrelationKind::Spearman),
            "uncentered" => Ok(CorrelationKind::Uncentered),
            _ => Err(format!("unknown correlation {s:?}")),
        }
    }
}

/// Compensated (Neumaier) summation.
pub fn stable_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

fn mean(xs: &[f64]) -> f64 {
    stable_sum(xs.iter().copied()) / xs.len() as f64
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<(), EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::DegenerateSeries(format!("lengths differ: {} vs {}", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(EvalError::DegenerateSeries(format!("need at least 2 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(EvalError::DegenerateSeries("non-finite value".into()));
    }
    Ok(())
}

pub fn correlation(kind: CorrelationKind, xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    check_pair(xs, ys)?;
    match kind {
        CorrelationKind::Pearson => pearson_unchecked(xs, ys),
        CorrelationKind::Spearman => pearson_unchecked(&average_ranks(xs), &average_ranks(ys)),
        CorrelationKind::Uncentered => {
            let sxy = stable_sum(xs.iter().zip(ys).map(|(x, y)| x * y));
            let sxx = stable_sum(xs.iter().map(|x| x * x));
            let syy = stable_sum(ys.iter().map(|y| y * y));
            if sxx == 0.0 || syy == 0.0 {
                return Err(EvalError::DegenerateSeries("all-zero series".into()));
            }
            Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
        }
    }
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    correlation(CorrelationKind::Pearson, xs, ys)
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    correlation(CorrelationKind::Spearman, xs, ys)
}

pub fn uncentered_pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    correlation(CorrelationKind::Uncentered, xs, ys)
}

fn pearson_unchecked(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    let (mx, my) = (mean(xs), mean(ys));
    let sxy = stable_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let sxx = stable_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let syy = stable_sum(ys.iter().map(|y| (y - my) * (y - my)));
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::DegenerateSeries("constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Harmonic mean of two correlations, 0 when either is not positive.
pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    pub p_at_k: f64,
    pub mrr: f64,
}

/// 1-based rank of the best-ranked gold id in `ranking`, if present.
pub fn best_gold_rank<G: AsRef<str>, R: AsRef<str>>(gold: &[G], ranking: &[R]) -> Option<usize> {
    ranking.iter().position(|r| gold.iter().any(|g| g.as_ref() == r.as_ref())).map(|p| p + 1)
}

/// P@k and MRR (both 0-100) from ranks of the best gold per instance.
/// `None` means the gold was not ranked within the cutoff and contributes 0.
pub fn rank_metrics_from_ranks(ranks: &[Option<usize>], k: usize) -> RankMetrics {
    if ranks.is_empty() {
        return RankMetrics { p_at_k: 0.0, mrr: 0.0 };
    }
    let n = ranks.len() as f64;
    let hits = ranks.iter().filter(|r| r.is_some_and(|r| r <= k)).count() as f64;
    let rr = stable_sum(ranks.iter().map(|r| r.map_or(0.0, |r| 1.0 / r as f64)));
    RankMetrics { p_at_k: 100.0 * hits / n, mrr: 100.0 * rr / n }
}

/// P@k and MRR over explicit rankings; the ranking length is the MRR cutoff.
pub fn rank_metrics<G: AsRef<str>, R: AsRef<str>>(golds: &[Vec<G>], rankings: &[Vec<R>], k: usize) -> RankMetrics {
    let ranks: Vec<Option<usize>> = golds.iter().zip(rankings).map(|(g, r)| best_gold_rank(g, r)).collect();
    rank_metrics_from_ranks(&ranks, k)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct F1Counts {
    pub correct: usize,
    pub attempted: usize,
    pub total: usize,
}

impl F1Counts {
    pub fn add(&mut self, attempted: bool, correct: bool) {
        self.total += 1;
        self.attempted += attempted as usize;
        self.correct += correct as usize;
    }

    pub fn precision(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.attempted as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.total as f64
        }
    }

    /// Micro F1 on a 0-100 scale.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}
