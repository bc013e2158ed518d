use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dag::{off_diagonal_mask, AdjacencyDag, DagLevel};
use super::losses::{level_causal_var, CausalLossWeights, ScmBatch};
use crate::error::{Error, Result};
use crate::numerics::{acyclicity, Adam, DenseMatrix, Graph};

/// Post-training acyclicity check: while h(A) exceeds the tolerance, double
/// α1 and train for more epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EscalationPolicy {
    pub tolerance: f64,
    pub max_escalations: usize,
    pub extra_epochs: usize,
}

impl Default for EscalationPolicy {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_escalations: 3,
            extra_epochs: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscalationReport {
    pub escalations: usize,
    pub alpha1: f64,
    pub h: f64,
    pub satisfied: bool,
}

impl EscalationPolicy {
    /// `train(epochs, alpha1)` runs that many epochs and returns the
    /// resulting h(A).
    pub fn run(
        &self,
        base_epochs: usize,
        alpha1: f64,
        mut train: impl FnMut(usize, f64) -> Result<f64>,
    ) -> Result<EscalationReport> {
        let mut alpha1 = alpha1;
        let mut h = train(base_epochs, alpha1)?;
        let mut escalations = 0;
        while h > self.tolerance && escalations < self.max_escalations {
            escalations += 1;
            alpha1 *= 2.0;
            log::warn!("acyclicity {h:.3e} above {:.1e}; escalation {escalations}, α1 = {alpha1}", self.tolerance);
            h = train(self.extra_epochs, alpha1)?;
        }
        let satisfied = h <= self.tolerance;
        if !satisfied {
            log::warn!("acyclicity {h:.3e} still above tolerance after {escalations} escalations");
        }
        Ok(EscalationReport {
            escalations,
            alpha1,
            h,
            satisfied,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DagTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Learning rate reached at the last planned epoch (geometric decay).
    pub lr_final: f64,
    pub weights: CausalLossWeights,
    pub escalation: EscalationPolicy,
    pub seed: u64,
}

impl Default for DagTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 256,
            lr: 1e-2,
            lr_final: 1e-5,
            weights: CausalLossWeights::default(),
            escalation: EscalationPolicy::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DagFit {
    pub dag: AdjacencyDag,
    pub report: EscalationReport,
    pub epoch_losses: Vec<f64>,
}

/// Learns a structure on fixed data with a zero-masked diagonal.
pub fn fit_dag(data: &ScmBatch, level: DagLevel, config: &DagTrainConfig) -> Result<DagFit> {
    if data.is_empty() || config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::InvalidInput("empty data, batch size or epoch count".into()));
    }
    config.weights.validate()?;
    let k = data.k;
    let d = 2 * k;
    let mask = off_diagonal_mask(d);
    let mut params = vec![DenseMatrix::zeros(d, d)];
    let mut opt = Adam::new(config.lr, &params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::new();
    let decay = if config.epochs > 1 {
        (config.lr_final / config.lr).powf(1.0 / (config.epochs - 1) as f64)
    } else {
        1.0
    };
    let mut epoch = 0usize;

    let report = config.escalation.run(config.epochs, config.weights.alpha1, |epochs, alpha1| {
        let weights = CausalLossWeights { alpha1, ..config.weights };
        for _ in 0..epochs {
            opt.lr = if epoch < config.epochs {
                config.lr * decay.powi(epoch as i32)
            } else {
                config.lr_final
            };
            order.shuffle(&mut rng);
            let mut total = 0.0;
            let mut batches = 0usize;
            for chunk in order.chunks(config.batch_size) {
                let b = data.b.gather_rows(chunk);
                let mut g = Graph::new();
                let a = g.param(params[0].clone());
                let m = g.constant(mask.clone());
                let masked = g.hadamard(a, m);
                let bv = g.constant(b);
                let loss = level_causal_var(&mut g, bv, masked, k, &weights);
                let value = g.scalar(loss);
                if !value.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        reason: format!("causal loss {value}"),
                    });
                }
                total += value;
                batches += 1;
                let grads = g.backward(loss);
                opt.step(&mut params, &[Some(grads.get_or_zeros(a, d, d))]);
            }
            epoch_losses.push(total / batches as f64);
            epoch += 1;
        }
        acyclicity(&params[0].hadamard(&mask))
    })?;

    let dag = AdjacencyDag::new(params[0].hadamard(&mask), level)?;
    Ok(DagFit {
        dag,
        report,
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escalation_doubles_until_satisfied() {
        let policy = EscalationPolicy::default();
        let mut calls = Vec::new();
        let report = policy
            .run(40, 1.0, |e, a| {
                calls.push((e, a));
                Ok(if a >= 4.0 { 0.0 } else { 1.0 })
            })
            .unwrap();
        assert_eq!(calls, vec![(40, 1.0), (10, 2.0), (10, 4.0)]);
        assert_eq!(report.escalations, 2);
        assert!(report.satisfied);
    }

    #[test]
    fn escalation_gives_up_after_three() {
        let report = EscalationPolicy::default().run(5, 1.0, |_, _| Ok(1.0)).unwrap();
        assert_eq!(report.escalations, 3);
        assert_eq!(report.alpha1, 8.0);
        assert!(!report.satisfied);
    }

    #[test]
    fn fit_keeps_diagonal_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = DenseMatrix::random_normal(64, 4, 1.0, &mut rng);
        let cfg = DagTrainConfig { epochs: 3, batch_size: 16, ..Default::default() };
        let fit = fit_dag(&ScmBatch::new(b, 2).unwrap(), DagLevel::Specific, &cfg).unwrap();
        for i in 0..4 {
            assert_eq!(fit.dag.a[(i, i)], 0.0);
        }
        assert!(fit.epoch_losses.iter().all(|l| l.is_finite()));
    }
}
