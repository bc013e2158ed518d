use serde::Serialize;

use super::{Bound, DenseMatrix, Graph, ParamId, ParamStore, Var};
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;

/// Outcome of comparing an analytic gradient to central differences.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares `grad(x)` against central differences of `f` around `x`, entry by
/// entry. Relative error uses the denominator `max(|a|, |n|, 1e-8)`.
pub fn grad_check(
    f: impl Fn(&DenseMatrix) -> f64,
    grad: impl Fn(&DenseMatrix) -> DenseMatrix,
    x: &DenseMatrix,
    eps: f64,
) -> Result<GradCheckReport> {
    let analytic = grad(x);
    if analytic.shape() != x.shape() {
        return Err(Error::Shape(format!(
            "gradient is {}x{} but the point is {}x{}",
            analytic.rows(),
            analytic.cols(),
            x.rows(),
            x.cols()
        )));
    }
    let base = f(x);
    if !base.is_finite() {
        return Err(Error::NonFinite("f(x) at the check point".into()));
    }

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut probe = x.clone();
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let orig = probe[(i, j)];
            probe[(i, j)] = orig + eps;
            let plus = f(&probe);
            probe[(i, j)] = orig - eps;
            let minus = f(&probe);
            probe[(i, j)] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!("f(x ± eps) at ({i}, {j})")));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[(i, j)];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            let rel = (a - numeric).abs() / denom;
            if rel > report.max_rel_error || (i, j) == (0, 0) && report.max_rel_error == 0.0 {
                report = GradCheckReport {
                    max_rel_error: rel.max(report.max_rel_error),
                    worst_index: (i, j),
                    analytic: a,
                    numeric,
                };
            }
        }
    }
    Ok(report)
}

/// Checks the tape gradient of a scalar graph with respect to one parameter
/// of `store`. `build` must produce a 1x1 node from the bound parameters.
pub fn grad_check_param(
    store: &ParamStore,
    id: ParamId,
    build: impl Fn(&mut Graph, &Bound) -> Var,
    eps: f64,
) -> Result<GradCheckReport> {
    let with = |x: &DenseMatrix| {
        let mut s = store.clone();
        *s.get_mut(id) = x.clone();
        s
    };
    let value = |x: &DenseMatrix| {
        let s = with(x);
        let mut g = Graph::new();
        let p = s.bind_frozen(&mut g);
        let out = build(&mut g, &p);
        g.scalar(out)
    };
    let grad = |x: &DenseMatrix| {
        let s = with(x);
        let mut g = Graph::new();
        let p = s.bind(&mut g, |q| q == id);
        let out = build(&mut g, &p);
        g.backward(out).get_or_zeros(p.var(id), x.rows(), x.cols())
    };
    grad_check(value, grad, store.get(id), eps)
}
