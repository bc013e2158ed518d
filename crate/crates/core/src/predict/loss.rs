use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Graph, Var};

pub const PRED_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            beta1: 1.0,
            beta2: 0.5,
            beta3: 1.0,
            beta4: 1e-5,
            gamma: 0.5,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let betas = [self.beta1, self.beta2, self.beta3, self.beta4];
        if betas.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidInput(format!("loss weights must be non-negative: {betas:?}")));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidInput(format!("γ = {} outside [0, 1]", self.gamma)));
        }
        Ok(())
    }
}

/// Summed binary cross-entropy over clamped predictions.
pub fn rec_loss(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut g = Graph::new();
    let p = g.constant(DenseMatrix::column_vector(predictions));
    let out = bce_sum_var(&mut g, p, labels);
    Ok(g.scalar(out))
}

/// Graph form of [`rec_loss`]; `pred` is B x 1.
pub fn bce_sum_var(g: &mut Graph, pred: Var, labels: &[f64]) -> Var {
    let n = labels.len();
    let clamped = g.clamp(pred, PRED_CLAMP, 1.0 - PRED_CLAMP);
    let log_p = g.log(clamped);
    let neg = g.scale(clamped, -1.0);
    let one_minus = g.add_scalar(neg, 1.0);
    let log_q = g.log(one_minus);
    let y = g.constant(DenseMatrix::column_vector(labels));
    let not_y = g.constant(DenseMatrix::from_fn(n, 1, |i, _| 1.0 - labels[i]));
    let a = g.hadamard(y, log_p);
    let b = g.hadamard(not_y, log_q);
    let both = g.add(a, b);
    let total = g.sum(both);
    g.scale(total, -1.0)
}

/// Batch-mean binary cross-entropy.
pub fn bce_mean_var(g: &mut Graph, pred: Var, labels: &[f64]) -> Var {
    let sum = bce_sum_var(g, pred, labels);
    g.scale(sum, 1.0 / labels.len().max(1) as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub rec_target: f64,
    pub rec_source: f64,
    pub causal: f64,
    pub domain: f64,
    pub omega_norm: f64,
}

/// L_rec^t + β1 L_rec^s + β2 L_cau + β3 L_dom + β4 ‖Ω‖₂.
pub fn total_loss(c: &LossComponents, w: &LossWeights) -> f64 {
    c.rec_target + w.beta1 * c.rec_source + w.beta2 * c.causal + w.beta3 * c.domain + w.beta4 * c.omega_norm
}

#[derive(Debug, Clone, Copy)]
pub struct LossComponentVars {
    pub rec_target: Var,
    pub rec_source: Var,
    pub causal: Option<Var>,
    pub domain: Var,
    pub omega_norm: Var,
}

impl LossComponentVars {
    pub fn values(&self, g: &Graph) -> LossComponents {
        LossComponents {
            rec_target: g.scalar(self.rec_target),
            rec_source: g.scalar(self.rec_source),
            causal: self.causal.map_or(0.0, |v| g.scalar(v)),
            domain: g.scalar(self.domain),
            omega_norm: g.scalar(self.omega_norm),
        }
    }
}

pub fn total_loss_var(g: &mut Graph, c: &LossComponentVars, w: &LossWeights) -> Var {
    let mut acc = c.rec_target;
    let mut terms = vec![(c.rec_source, w.beta1), (c.domain, w.beta3), (c.omega_norm, w.beta4)];
    if let Some(causal) = c.causal {
        terms.insert(1, (causal, w.beta2));
    }
    for (v, weight) in terms {
        let scaled = g.scale(v, weight);
        acc = g.add(acc, scaled);
    }
    acc
}
