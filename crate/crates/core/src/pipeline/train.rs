use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::save_checkpoint;
use super::config::RunConfig;
use super::model::{CdrModel, ModelInputs, Phase};
use crate::causal::{off_diagonal_mask, CausalLossWeights, EscalationReport};
use crate::data::LabeledPair;
use crate::error::{Error, Result};
use crate::numerics::{acyclicity, Adam, DenseMatrix, Graph};
use crate::predict::LossComponents;

#[derive(Debug, Clone)]
pub struct TrainData {
    pub inputs: ModelInputs,
    pub source_pairs: Vec<LabeledPair>,
    pub target_pairs: Vec<LabeledPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub phase: Phase,
    pub epoch: usize,
    pub total: f64,
    pub components: LossComponents,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    pub escalation: Option<EscalationReport>,
    pub h_specific: f64,
    pub h_shared: f64,
}

struct Trainer<'a> {
    config: &'a RunConfig,
    data: &'a TrainData,
    model: &'a mut CdrModel,
    opt: Adam,
    rng: ChaCha8Rng,
    target_order: Vec<usize>,
    source_order: Vec<usize>,
    log: Vec<EpochLog>,
    epoch: usize,
    seed: u64,
    checkpoint_dir: Option<&'a Path>,
}

impl Trainer<'_> {
    fn run_epoch(&mut self, phase: Phase, causal: &CausalLossWeights) -> Result<()> {
        let snapshot: Vec<DenseMatrix> = self.model.store.values().to_vec();
        self.target_order.shuffle(&mut self.rng);
        self.source_order.shuffle(&mut self.rng);
        let bs = self.config.batch_size;
        let steps = self.target_order.len().div_ceil(bs).max(1);
        let source_bs = self.source_order.len().div_ceil(steps).max(1);
        let dags = self.model.dag_ids();
        let mut sum = LossComponents::default();
        let mut total = 0.0;
        for step in 0..steps {
            let t_idx = &self.target_order[(step * bs).min(self.target_order.len())..((step + 1) * bs).min(self.target_order.len())];
            let s_lo = (step * source_bs).min(self.source_order.len());
            let s_idx = &self.source_order[s_lo..(s_lo + source_bs).min(self.source_order.len())];
            let target: Vec<LabeledPair> = t_idx.iter().map(|&i| self.data.target_pairs[i]).collect();
            let source: Vec<LabeledPair> = s_idx.iter().map(|&i| self.data.source_pairs[i]).collect();

            let mut g = Graph::new();
            let p = self.model.store.bind(&mut g, |id| phase == Phase::Two || !dags.contains(&id));
            let (loss, parts) = self.model.loss(
                &mut g,
                &p,
                &self.data.inputs,
                phase,
                &source,
                &target,
                &self.config.loss_weights,
                causal,
            );
            let value = g.scalar(loss);
            if !value.is_finite() {
                self.model.store.values_mut().clone_from_slice(&snapshot);
                if let Some(dir) = self.checkpoint_dir {
                    save_checkpoint(self.model, dir, "last_finite", phase, self.epoch, self.seed, &self.config.short_hash())?;
                }
                return Err(Error::Diverged {
                    epoch: self.epoch,
                    reason: format!("loss {value} at step {step} of phase {phase:?}"),
                });
            }
            let c = parts.values(&g);
            sum.rec_target += c.rec_target;
            sum.rec_source += c.rec_source;
            sum.causal += c.causal;
            sum.domain += c.domain;
            sum.omega_norm += c.omega_norm;
            total += value;
            let grads = p.collect(&g.backward(loss), &self.model.store);
            self.opt.step(self.model.store.values_mut(), &grads);
        }
        let n = steps as f64;
        self.log.push(EpochLog {
            phase,
            epoch: self.epoch,
            total: total / n,
            components: LossComponents {
                rec_target: sum.rec_target / n,
                rec_source: sum.rec_source / n,
                causal: sum.causal / n,
                domain: sum.domain / n,
                omega_norm: sum.omega_norm / n,
            },
        });
        log::debug!("epoch {} ({phase:?}): loss {:.5}", self.epoch, total / n);
        self.epoch += 1;
        Ok(())
    }

    fn acyclicity(&self) -> Result<(f64, f64)> {
        let mask = off_diagonal_mask(2 * self.model.spec.k);
        let h = |id| acyclicity(&self.model.store.get(id).hadamard(&mask));
        Ok((h(self.model.dag_spe)?, h(self.model.dag_sha)?))
    }
}

/// Phase one trains everything but the structures without the causal loss;
/// phase two adds β2·L_cau and checks acyclicity under the escalation policy.
/// A non-finite loss restores the parameters from the start of the epoch,
/// writes them as `last_finite` when `checkpoint_dir` is set, and aborts.
pub fn train_two_phase(
    config: &RunConfig,
    model: &mut CdrModel,
    data: &TrainData,
    seed: u64,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainReport> {
    config.validate()?;
    model.check_inputs(&data.inputs)?;
    if data.target_pairs.is_empty() || data.source_pairs.is_empty() {
        return Err(Error::InvalidInput("training needs source and target pairs".into()));
    }
    let opt = Adam::new(config.lr, model.store.values());
    let mut t = Trainer {
        config,
        data,
        opt,
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed),
        target_order: (0..data.target_pairs.len()).collect(),
        source_order: (0..data.source_pairs.len()).collect(),
        log: Vec::new(),
        epoch: 0,
        seed,
        checkpoint_dir,
        model,
    };
    let hash = config.short_hash();
    for _ in 0..config.epochs_phase1 {
        t.run_epoch(Phase::One, &config.causal_weights)?;
    }
    if let Some(dir) = checkpoint_dir {
        save_checkpoint(t.model, dir, "phase1", Phase::One, t.epoch, seed, &hash)?;
    }

    let structured = config.loss_weights.beta2 > 0.0
        && (t.model.spec.ablation.uses_specific_dag() || t.model.spec.ablation.uses_shared_dag());
    let escalation = if structured && config.epochs_phase2 > 0 {
        let report = config.escalation.run(config.epochs_phase2, config.causal_weights.alpha1, |epochs, alpha1| {
            let w = CausalLossWeights { alpha1, ..config.causal_weights };
            for _ in 0..epochs {
                t.run_epoch(Phase::Two, &w)?;
            }
            let (a, b) = t.acyclicity()?;
            Ok(a.max(b))
        })?;
        Some(report)
    } else {
        for _ in 0..config.epochs_phase2 {
            t.run_epoch(Phase::Two, &config.causal_weights)?;
        }
        None
    };
    let (h_specific, h_shared) = t.acyclicity()?;
    if let Some(dir) = checkpoint_dir {
        save_checkpoint(t.model, dir, "final", Phase::Two, t.epoch, seed, &hash)?;
    }
    Ok(TrainReport {
        epochs: t.log,
        escalation,
        h_specific,
        h_shared,
    })
}
