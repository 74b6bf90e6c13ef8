//! Truncated SVD by randomized range finding, and PCA built on it.

use std::io::Write;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::EvalError;

pub const OVERSAMPLING: usize = 10;
pub const POWER_ITERATIONS: usize = 5;

/// Rank-k projection of a matrix.
#[derive(Clone, Debug)]
pub struct Reduced {
    /// n×k, rows projected onto the top right singular directions (U_k Σ_k).
    pub coords: DMatrix<f64>,
    /// k×d, top right singular vectors as rows.
    pub components: DMatrix<f64>,
    pub singular_values: Vec<f64>,
}

impl Reduced {
    /// Rank-k approximation of the input.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.coords * &self.components
    }
}

fn orthonormal_basis(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// Top-k truncated SVD, deterministic for a given seed.
pub fn svd_reduce(a: &DMatrix<f64>, k: usize, seed: u64) -> Result<Reduced, EvalError> {
    let (n, d) = a.shape();
    let max_k = n.min(d);
    if k == 0 || k > max_k {
        return Err(EvalError::DimError(format!("k = {k} must lie in 1..={max_k} for a {n}x{d} matrix")));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(EvalError::DimError("matrix has non-finite entries".into()));
    }
    let l = (k + OVERSAMPLING).min(max_k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::<f64>::from_fn(d, l, |_, _| StandardNormal.sample(&mut rng));

    let mut q = orthonormal_basis(a * omega);
    for _ in 0..POWER_ITERATIONS {
        let z = orthonormal_basis(a.transpose() * &q);
        q = orthonormal_basis(a * z);
    }
    let b = q.transpose() * a;
    let svd = b.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    order.truncate(k);

    let mut components = DMatrix::<f64>::zeros(k, d);
    for (row, &src) in order.iter().enumerate() {
        let mut v = v_t.row(src).clone_owned();
        // fix the sign so the largest-magnitude entry is positive
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            v.neg_mut();
        }
        components.set_row(row, &v);
    }
    let coords = a * components.transpose();
    let singular_values = order.iter().map(|&i| svd.singular_values[i]).collect();
    Ok(Reduced { coords, components, singular_values })
}

/// Same as [`svd_reduce`] on row vectors.
pub fn svd_reduce_rows<V: AsRef<[f64]>>(rows: &[V], k: usize, seed: u64) -> Result<Reduced, EvalError> {
    svd_reduce(&rows_to_matrix(rows)?, k, seed)
}

pub fn rows_to_matrix<V: AsRef<[f64]>>(rows: &[V]) -> Result<DMatrix<f64>, EvalError> {
    let d = rows.first().map_or(0, |r| r.as_ref().len());
    if rows.iter().any(|r| r.as_ref().len() != d) {
        return Err(EvalError::DimError("rows differ in length".into()));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), d, rows.iter().flat_map(|r| r.as_ref().iter().copied())))
}

#[derive(Clone, Debug)]
pub struct Pca {
    /// n×k coordinates.
    pub coords: DMatrix<f64>,
    pub mean: Vec<f64>,
    /// Variance along each principal direction (denominator n - 1).
    pub explained_variance: Vec<f64>,
    pub components: DMatrix<f64>,
}

/// Mean-centred projection onto the top-k principal directions.
pub fn pca_coords<V: AsRef<[f64]>>(rows: &[V], k: usize, seed: u64) -> Result<Pca, EvalError> {
    if rows.len() < 2 {
        return Err(EvalError::DimError(format!("PCA needs at least 2 points, got {}", rows.len())));
    }
    let mut m = rows_to_matrix(rows)?;
    let n = m.nrows() as f64;
    let mean: Vec<f64> = m.column_iter().map(|c| c.sum() / n).collect();
    for (j, mu) in mean.iter().enumerate() {
        m.column_mut(j).add_scalar_mut(-mu);
    }
    let r = svd_reduce(&m, k, seed)?;
    let explained_variance = r.singular_values.iter().map(|s| s * s / (n - 1.0)).collect();
    Ok(Pca { coords: r.coords, mean, explained_variance, components: r.components })
}

/// CSV with a label column followed by one column per coordinate.
pub fn write_coords_csv<L: AsRef<str>>(
    labels: &[L],
    coords: &DMatrix<f64>,
    writer: impl Write,
) -> Result<(), EvalError> {
    if labels.len() != coords.nrows() {
        return Err(EvalError::DimError(format!("{} labels for {} rows", labels.len(), coords.nrows())));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["label".to_string()];
    header.extend((1..=coords.ncols()).map(|i| format!("pc{i}")));
    w.write_record(&header)?;
    for (label, row) in labels.iter().zip(coords.row_iter()) {
        let mut rec = vec![label.as_ref().to_string()];
        rec.extend(row.iter().map(|x| format!("{x:.6}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
