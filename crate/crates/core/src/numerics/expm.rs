//! Matrix exponential and the trace-exponential acyclicity measure.

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Taylor order used after scaling. With the scaled norm at most 1/2 the
/// truncation remainder is below 0.5^19 / 19! * e^0.5, far under 1e-12.
const TAYLOR_ORDER: usize = 18;
const SCALED_NORM: f64 = 0.5;

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm(m: &DenseMatrix) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "matrix exponential of a non-square {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("matrix exponential input".into()));
    }
    let n = m.rows();
    let norm = m.norm_one();
    let squarings = if norm > SCALED_NORM {
        (norm / SCALED_NORM).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m.scale(0.5f64.powi(squarings));

    // Horner form: I + X(I + X/2(I + X/3(...)))
    let mut acc = DenseMatrix::identity(n);
    for k in (1..=TAYLOR_ORDER).rev() {
        let mut next = scaled.matmul_unchecked(&acc).scale(1.0 / k as f64);
        for i in 0..n {
            next[(i, i)] += 1.0;
        }
        acc = next;
    }
    for _ in 0..squarings {
        acc = acc.matmul_unchecked(&acc);
    }
    Ok(acc)
}

/// Tr(e^M).
pub fn expm_trace(m: &DenseMatrix) -> Result<f64> {
    Ok(expm(m)?.trace())
}

/// h(A) = Tr(e^{A∘A}) − d. Zero exactly when the weighted graph of A is acyclic.
pub fn acyclicity(a: &DenseMatrix) -> Result<f64> {
    let sq = a.hadamard(a);
    // clamp: rounding can push an acyclic value a hair below zero
    Ok((expm_trace(&sq)? - a.rows() as f64).max(0.0))
}

/// h(A) together with its gradient (e^{A∘A})ᵀ ∘ 2A.
pub fn acyclicity_with_grad(a: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
    let sq = a.hadamard(a);
    let e = expm(&sq)?;
    let h = (e.trace() - a.rows() as f64).max(0.0);
    let grad = e.transpose().hadamard(a).scale(2.0);
    Ok((h, grad))
}
