//! Exact cosine nearest-neighbour search over sense embeddings.
//!
//! Rows are stored unit-normalized twice: as f32 for a fast full scan and as
//! f64 for rescoring. A query scans the f32 rows, keeps every row whose
//! approximate score could still reach the top k given a bound on f32
//! rounding error, and rescores those rows in f64. Rankings therefore equal
//! an exhaustive f64 computation.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::inventory::Level;
use crate::senselearn::SenseEmbeddingSet;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("zero vector for {0}")]
    ZeroVector(String),
    #[error("non-finite value in vector for {0}")]
    NonFinite(String),
    #[error("no candidates given")]
    EmptyCandidates,
    #[error("sense {0} is not in the index")]
    UnknownSense(String),
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("dimension mismatch: index has {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
}

#[derive(Clone, Debug)]
pub struct SenseIndex {
    level: Level,
    dim: usize,
    ids: Vec<String>,
    lookup: HashMap<String, usize>,
    rows32: Vec<f32>,
    rows64: Vec<f64>,
}

/// Sixteen-lane f32 dot product.
#[inline]
fn dot32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; 16];
    let (ca, cb) = (a.chunks_exact(16), b.chunks_exact(16));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..16 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut s: f32 = acc.iter().sum();
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn dot64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn by_score_then_id(a: &(usize, f64), b: &(usize, f64), ids: &[String]) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| ids[a.0].cmp(&ids[b.0]))
}

impl SenseIndex {
    pub fn build(set: &SenseEmbeddingSet) -> Result<Self, IndexError> {
        let dim = set.dim();
        let mut ids = Vec::with_capacity(set.len());
        let mut data = Vec::with_capacity(set.len() * dim);
        for (id, v) in set.iter() {
            ids.push(id.to_string());
            data.extend_from_slice(v);
        }
        Self::from_rows(set.level, ids, data, dim)
    }

    /// Builds from row-major data, normalizing rows in place.
    pub fn from_rows(level: Level, ids: Vec<String>, mut data: Vec<f64>, dim: usize) -> Result<Self, IndexError> {
        if data.len() != ids.len() * dim {
            return Err(IndexError::DimMismatch { expected: ids.len() * dim, got: data.len() });
        }
        let mut lookup = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if lookup.insert(id.clone(), i).is_some() {
                return Err(IndexError::DuplicateId(id.clone()));
            }
        }
        let mut rows32 = Vec::with_capacity(data.len());
        if dim > 0 {
            for (row, id) in data.chunks_exact_mut(dim).zip(&ids) {
                if row.iter().any(|x| !x.is_finite()) {
                    return Err(IndexError::NonFinite(id.clone()));
                }
                let norm = dot64(row, row).sqrt();
                if norm == 0.0 {
                    return Err(IndexError::ZeroVector(id.clone()));
                }
                row.iter_mut().for_each(|x| *x /= norm);
                rows32.extend(row.iter().map(|&x| x as f32));
            }
        } else if let Some(id) = ids.first() {
            return Err(IndexError::ZeroVector(id.clone()));
        }
        Ok(SenseIndex { level, dim, ids, lookup, rows32, rows64: data })
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.lookup.contains_key(id)
    }

    /// Unit-normalized stored row.
    pub fn row(&self, id: &str) -> Option<&[f64]> {
        self.lookup.get(id).map(|&i| self.row64(i))
    }

    fn row64(&self, i: usize) -> &[f64] {
        &self.rows64[i * self.dim..(i + 1) * self.dim]
    }

    fn row32(&self, i: usize) -> &[f32] {
        &self.rows32[i * self.dim..(i + 1) * self.dim]
    }

    /// Largest possible gap between the f32 and f64 score of a unit row
    /// against a unit query.
    fn error_bound(&self) -> f32 {
        (self.dim as f32 / 16.0 + 32.0) * f32::EPSILON
    }

    fn unit_query(&self, ctx: &[f64]) -> Result<Vec<f64>, IndexError> {
        if ctx.len() != self.dim {
            return Err(IndexError::DimMismatch { expected: self.dim, got: ctx.len() });
        }
        if ctx.iter().any(|x| !x.is_finite()) {
            return Err(IndexError::NonFinite("query".into()));
        }
        let norm = dot64(ctx, ctx).sqrt();
        if norm == 0.0 {
            return Err(IndexError::ZeroVector("query".into()));
        }
        Ok(ctx.iter().map(|x| x / norm).collect())
    }

    /// Cosine similarity between a context and a stored sense.
    pub fn similarity(&self, ctx: &[f64], id: &str) -> Result<f64, IndexError> {
        let q = self.unit_query(ctx)?;
        let &i = self.lookup.get(id).ok_or_else(|| IndexError::UnknownSense(id.to_string()))?;
        Ok(dot64(&q, self.row64(i)))
    }

    /// Cosine similarity between two stored senses.
    pub fn pair_similarity(&self, a: &str, b: &str) -> Result<f64, IndexError> {
        let ra = self.row(a).ok_or_else(|| IndexError::UnknownSense(a.to_string()))?;
        let rb = self.row(b).ok_or_else(|| IndexError::UnknownSense(b.to_string()))?;
        Ok(dot64(ra, rb))
    }

    /// Most similar candidate. Ties go to the earlier candidate.
    pub fn disambiguate<'c, S: AsRef<str>>(
        &self,
        ctx: &[f64],
        candidates: &'c [S],
    ) -> Result<(&'c str, f64), IndexError> {
        let (i, s) = self.best_candidate(ctx, candidates)?;
        Ok((candidates[i].as_ref(), s))
    }

    /// Position and similarity of the most similar candidate.
    pub fn best_candidate<S: AsRef<str>>(&self, ctx: &[f64], candidates: &[S]) -> Result<(usize, f64), IndexError> {
        if candidates.is_empty() {
            return Err(IndexError::EmptyCandidates);
        }
        let q = self.unit_query(ctx)?;
        let mut best: Option<(usize, f64)> = None;
        for (pos, c) in candidates.iter().enumerate() {
            let c = c.as_ref();
            let &i = self.lookup.get(c).ok_or_else(|| IndexError::UnknownSense(c.to_string()))?;
            let s = dot64(&q, self.row64(i));
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((pos, s));
            }
        }
        Ok(best.expect("non-empty candidates"))
    }

    /// Top `k` senses by cosine, descending, ties by ascending id. `k` is
    /// clamped to the index size.
    pub fn match_topk(&self, ctx: &[f64], k: usize) -> Result<Vec<(&str, f64)>, IndexError> {
        let q = self.unit_query(ctx)?;
        let k = k.min(self.len());
        if k == 0 {
            return Ok(Vec::new());
        }
        let q32: Vec<f32> = q.iter().map(|&x| x as f32).collect();
        let approx: Vec<f32> = (0..self.len()).map(|i| dot32(&q32, self.row32(i))).collect();

        let mut sorted = approx.clone();
        let (_, kth, _) = sorted.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
        let threshold = *kth - 2.0 * self.error_bound();

        let mut shortlist: Vec<(usize, f64)> = approx
            .iter()
            .enumerate()
            .filter(|(_, &a)| a >= threshold)
            .map(|(i, _)| (i, dot64(&q, self.row64(i))))
            .collect();
        shortlist.sort_unstable_by(|a, b| by_score_then_id(a, b, &self.ids));
        shortlist.truncate(k);
        Ok(shortlist.into_iter().map(|(i, s)| (self.ids[i].as_str(), s)).collect())
    }

    /// Runs [`Self::match_topk`] for many queries in parallel.
    pub fn match_topk_batch<Q: AsRef<[f64]> + Sync>(
        &self,
        queries: &[Q],
        k: usize,
    ) -> Result<Vec<Vec<(&str, f64)>>, IndexError> {
        queries.par_iter().map(|q| self.match_topk(q.as_ref(), k)).collect()
    }

    /// 1-based position of `id` in the full ranking for `ctx`.
    pub fn rank_of(&self, ctx: &[f64], id: &str) -> Result<usize, IndexError> {
        let q = self.unit_query(ctx)?;
        let &target = self.lookup.get(id).ok_or_else(|| IndexError::UnknownSense(id.to_string()))?;
        let exact = dot64(&q, self.row64(target));
        let eps = self.error_bound() as f64;
        let q32: Vec<f32> = q.iter().map(|&x| x as f32).collect();
        let mut rank = 1;
        for i in 0..self.len() {
            if i == target {
                continue;
            }
            let a = dot32(&q32, self.row32(i)) as f64;
            let ahead = if a > exact + eps {
                true
            } else if a < exact - eps {
                false
            } else {
                let s = dot64(&q, self.row64(i));
                s > exact || (s == exact && self.ids[i] < self.ids[target])
            };
            rank += ahead as usize;
        }
        Ok(rank)
    }
}
