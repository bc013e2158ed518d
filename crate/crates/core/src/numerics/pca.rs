//! Principal component analysis via the covariance eigendecomposition.

use nalgebra::{DMatrix, SymmetricEigen};

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest are treated as rank deficiency.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Pca {
    /// k x D, rows ordered by decreasing explained variance.
    pub components: DenseMatrix,
    /// 1 x D column means.
    pub mean: DenseMatrix,
    /// Variance along each component (population covariance, zero for padding).
    pub explained_variance: Vec<f64>,
    /// Total variance of the input (trace of the covariance).
    pub total_variance: f64,
    /// Number of trailing components that are zero padding because k exceeded the rank.
    pub padded: usize,
}

impl Pca {
    pub fn fit(x: &DenseMatrix, k: usize) -> Result<Self> {
        let (n, d) = x.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput("pca on an empty matrix".into()));
        }
        if k == 0 || k > d {
            return Err(Error::InvalidInput(format!("pca target dimension {k} must lie in 1..={d}")));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("pca input".into()));
        }
        let mean = x.column_means();
        let centered = DenseMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[(0, j)]);

        let cov = centered.transa_matmul(&centered).scale(1.0 / n as f64);
        let total_variance = cov.trace();
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, cov.as_slice()));

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let top = eig.eigenvalues[order[0]].max(0.0);

        let mut components = DenseMatrix::zeros(k, d);
        let mut explained_variance = vec![0.0; k];
        let mut padded = 0;
        for (slot, &idx) in order.iter().take(k).enumerate() {
            let lambda = eig.eigenvalues[idx];
            if top <= 0.0 || lambda <= RANK_TOL * top {
                padded += 1;
                continue;
            }
            let v = eig.eigenvectors.column(idx);
            // deterministic sign: largest-magnitude coordinate positive
            let pivot = (0..d).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a))).unwrap();
            let s = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..d {
                components[(slot, j)] = s * v[j];
            }
            explained_variance[slot] = lambda;
        }
        if padded > 0 {
            log::warn!("pca: requested {k} components but only {} carry variance; zero-padded {padded}", k - padded);
        }
        Ok(Self {
            components,
            mean,
            explained_variance,
            total_variance,
            padded,
        })
    }

    pub fn transform(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != self.mean.cols() {
            return Err(Error::Shape(format!(
                "pca transform expects {} columns, got {}",
                self.mean.cols(),
                x.cols()
            )));
        }
        let centered = DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] - self.mean[(0, j)]);
        Ok(centered.matmul_transb(&self.components))
    }

    /// Maps reduced coordinates back to the input space.
    pub fn inverse_transform(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        let back = z.matmul(&self.components)?;
        Ok(back.add_row_broadcast(&self.mean))
    }
}
