use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::Ablation;
use super::metrics::ScoredCandidates;
use crate::causal::{invariant_var, level_causal_var, off_diagonal_mask, CausalLossWeights, Fusion, InferenceMode};
use crate::data::{EvalCandidateSet, LabeledPair};
use crate::error::{Error, Result};
use crate::numerics::{Bound, CsrMatrix, DenseMatrix, Graph, ParamId, ParamStore, Var};
use crate::predict::{bce_mean_var, total_loss_var, LossComponentVars, LossWeights, PredictorParams};
use crate::representation::disentangle::Grl;
use crate::representation::embed::{attribute_embeddings, init_attribute_matrix};
use crate::representation::gcn::propagate;
use crate::representation::{domain_losses, Discriminator, Disentangler, InitialProjection, TEXT_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Structures frozen, raw preferences fused, no causal loss.
    One,
    /// Structures trained and invariant preferences fused.
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub k: usize,
    pub num_users: usize,
    pub source_items: usize,
    pub target_items: usize,
    pub gcn_layers: usize,
    pub inference_mode: InferenceMode,
    pub ablation: Ablation,
}

/// Fixed per-domain inputs: document embeddings and the training graph.
#[derive(Debug, Clone)]
pub struct DomainGraph {
    pub user_text: DenseMatrix,
    pub item_text: DenseMatrix,
    pub adjacency: Arc<CsrMatrix>,
}

#[derive(Debug, Clone)]
pub struct ModelInputs {
    pub source: DomainGraph,
    pub target: DomainGraph,
    /// Confounder centroids, J x k, or `None` to drop the branch.
    pub c_source: Option<DenseMatrix>,
    pub c_target: Option<DenseMatrix>,
}

#[derive(Debug, Clone)]
pub struct CdrModel {
    pub spec: ModelSpec,
    pub store: ParamStore,
    pub w_att: ParamId,
    pub proj_source: InitialProjection,
    pub proj_target: InitialProjection,
    pub disentangler: Disentangler,
    pub discriminator: Discriminator,
    pub dag_spe: ParamId,
    pub dag_sha: ParamId,
    pub fusion_source: Fusion,
    pub fusion_target: Fusion,
    pub pred_source: PredictorParams,
    pub pred_target: PredictorParams,
}

/// Per-step user and item representations.
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    pub e_att: Var,
    pub users_source: Var,
    pub items_source: Var,
    pub users_target: Var,
    pub items_target: Var,
    pub domain: Var,
    pub causal: Option<Var>,
}

impl CdrModel {
    pub fn new(spec: ModelSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = spec.k;
        let mut store = ParamStore::new();
        let w_att = store.add("w_att", init_attribute_matrix(k, spec.num_users, &mut rng));
        let proj_source = InitialProjection::new(&mut store, "source", k, &mut rng);
        let proj_target = InitialProjection::new(&mut store, "target", k, &mut rng);
        let disentangler = Disentangler::new(&mut store, k, &mut rng);
        let discriminator = Discriminator::new(&mut store, k, &mut rng);
        let dag_spe = store.add("dag.specific", DenseMatrix::zeros(2 * k, 2 * k));
        let dag_sha = store.add("dag.shared", DenseMatrix::zeros(2 * k, 2 * k));
        let fusion_source = Fusion::new(&mut store, "fusion.source", k, &mut rng);
        let fusion_target = Fusion::new(&mut store, "fusion.target", k, &mut rng);
        let pred_source = PredictorParams::new(&mut store, "pred.source", k, &mut rng);
        let pred_target = PredictorParams::new(&mut store, "pred.target", k, &mut rng);
        Self {
            spec,
            store,
            w_att,
            proj_source,
            proj_target,
            disentangler,
            discriminator,
            dag_spe,
            dag_sha,
            fusion_source,
            fusion_target,
            pred_source,
            pred_target,
        }
    }

    pub fn dag_ids(&self) -> [ParamId; 2] {
        [self.dag_spe, self.dag_sha]
    }

    pub fn check_inputs(&self, inputs: &ModelInputs) -> Result<()> {
        let s = &self.spec;
        let check = |name: &str, d: &DomainGraph, items: usize| -> Result<()> {
            if d.user_text.shape() != (s.num_users, TEXT_DIM) || d.item_text.shape() != (items, TEXT_DIM) {
                return Err(Error::Shape(format!(
                    "{name} text embeddings {:?}/{:?} for {} users and {items} items",
                    d.user_text.shape(),
                    d.item_text.shape(),
                    s.num_users
                )));
            }
            if d.adjacency.rows() != s.num_users + items {
                return Err(Error::Shape(format!("{name} adjacency has {} nodes", d.adjacency.rows())));
            }
            Ok(())
        };
        check("source", &inputs.source, s.source_items)?;
        check("target", &inputs.target, s.target_items)?;
        for c in [&inputs.c_source, &inputs.c_target].into_iter().flatten() {
            if c.cols() != s.k || c.rows() == 0 {
                return Err(Error::Shape(format!("confounder subspace {:?} for k = {}", c.shape(), s.k)));
            }
        }
        Ok(())
    }

    fn masked_dag(&self, g: &mut Graph, p: &Bound, id: ParamId) -> Var {
        let mask = g.constant(off_diagonal_mask(2 * self.spec.k));
        g.hadamard(p.var(id), mask)
    }

    /// Builds all user and item representations. The structures enter the
    /// graph only in phase two.
    pub fn forward(
        &self,
        g: &mut Graph,
        p: &Bound,
        inputs: &ModelInputs,
        phase: Phase,
        loss_weights: &LossWeights,
        causal_weights: &CausalLossWeights,
    ) -> Forward {
        let s = self.spec;
        let m = s.num_users;
        let all_users = Arc::new((0..m).collect::<Vec<_>>());
        let e_att = attribute_embeddings(g, p.var(self.w_att), all_users);

        let domain = |g: &mut Graph, proj: &InitialProjection, d: &DomainGraph, items: usize| {
            let ut = g.constant(d.user_text.clone());
            let it = g.constant(d.item_text.clone());
            let (u0, v0) = proj.forward(g, p, e_att, ut, it);
            let x = g.vconcat(&[u0, v0]);
            let h = propagate(g, &d.adjacency, x, s.gcn_layers);
            (g.slice_rows(h, 0, m), g.slice_rows(h, m, m + items))
        };
        let (eu_s, items_source) = domain(g, &self.proj_source, &inputs.source, s.source_items);
        let (eu_t, items_target) = domain(g, &self.proj_target, &inputs.target, s.target_items);

        let prefs = self.disentangler.forward(g, p, eu_s, eu_t);
        let dom = domain_losses(g, p, &self.discriminator, &prefs, loss_weights.gamma, Grl::new(1.0));

        let two = phase == Phase::Two;
        let use_spe = two && s.ablation.uses_specific_dag();
        let use_sha = two && s.ablation.uses_shared_dag();
        let mut causal_terms = Vec::new();
        let spe_t = if use_spe {
            let a = self.masked_dag(g, p, self.dag_spe);
            let b = g.hconcat(&[e_att, prefs.spe_t]);
            causal_terms.push(level_causal_var(g, b, a, s.k, causal_weights));
            invariant_var(g, e_att, a, s.k, s.inference_mode)
        } else {
            prefs.spe_t
        };
        let (sha_s, sha_t) = if use_sha {
            let a = self.masked_dag(g, p, self.dag_sha);
            let bs = g.hconcat(&[e_att, prefs.sha_s]);
            let bt = g.hconcat(&[e_att, prefs.sha_t]);
            let b = g.vconcat(&[bs, bt]);
            causal_terms.push(level_causal_var(g, b, a, s.k, causal_weights));
            let inv = invariant_var(g, e_att, a, s.k, s.inference_mode);
            (inv, inv)
        } else {
            (prefs.sha_s, prefs.sha_t)
        };
        let (users_target, _) = self.fusion_target.forward(g, p, spe_t, sha_t);
        let (users_source, _) = self.fusion_source.forward(g, p, prefs.spe_s, sha_s);

        let causal = causal_terms.into_iter().reduce(|a, b| g.add(a, b));
        Forward {
            e_att,
            users_source,
            items_source,
            users_target,
            items_target,
            domain: dom.total,
            causal,
        }
    }

    fn confounders(&self, g: &mut Graph, c: &Option<DenseMatrix>) -> Option<Var> {
        match c {
            Some(c) if self.spec.ablation.uses_confounders() => Some(g.constant(c.clone())),
            _ => None,
        }
    }

    fn score_pairs(
        &self,
        g: &mut Graph,
        p: &Bound,
        pred: &PredictorParams,
        users: Var,
        items: Var,
        c: Option<Var>,
        pairs: &[LabeledPair],
    ) -> Var {
        let u = Arc::new(pairs.iter().map(|x| x.user).collect::<Vec<_>>());
        let i = Arc::new(pairs.iter().map(|x| x.item).collect::<Vec<_>>());
        let eu = g.gather_rows(users, u);
        let ev = g.gather_rows(items, i);
        pred.score(g, p, eu, ev, c)
    }

    /// Total objective for one step and its components.
    #[allow(clippy::too_many_arguments)]
    pub fn loss(
        &self,
        g: &mut Graph,
        p: &Bound,
        inputs: &ModelInputs,
        phase: Phase,
        source: &[LabeledPair],
        target: &[LabeledPair],
        loss_weights: &LossWeights,
        causal_weights: &CausalLossWeights,
    ) -> (Var, LossComponentVars) {
        let f = self.forward(g, p, inputs, phase, loss_weights, causal_weights);
        let ct = self.confounders(g, &inputs.c_target);
        let cs = self.confounders(g, &inputs.c_source);
        let yt = self.score_pairs(g, p, &self.pred_target, f.users_target, f.items_target, ct, target);
        let ys = self.score_pairs(g, p, &self.pred_source, f.users_source, f.items_source, cs, source);
        let lt: Vec<f64> = target.iter().map(|x| x.label).collect();
        let ls: Vec<f64> = source.iter().map(|x| x.label).collect();
        let rec_target = bce_mean_var(g, yt, &lt);
        let rec_source = bce_mean_var(g, ys, &ls);
        let dags = self.dag_ids();
        let trainable: Vec<Var> = self
            .store
            .ids()
            .filter(|id| phase == Phase::Two || !dags.contains(id))
            .map(|id| p.var(id))
            .collect();
        let omega_norm = g.global_norm(&trainable);
        let causal = if phase == Phase::Two && loss_weights.beta2 > 0.0 { f.causal } else { None };
        let parts = LossComponentVars {
            rec_target,
            rec_source,
            causal,
            domain: f.domain,
            omega_norm,
        };
        (total_loss_var(g, &parts, loss_weights), parts)
    }

    /// Target-domain scores for every candidate of every set.
    pub fn score_candidates(
        &self,
        inputs: &ModelInputs,
        phase: Phase,
        sets: &[EvalCandidateSet],
    ) -> Result<Vec<ScoredCandidates>> {
        self.check_inputs(inputs)?;
        let mut g = Graph::new();
        let p = self.store.bind_frozen(&mut g);
        let f = self.forward(&mut g, &p, inputs, phase, &LossWeights::default(), &CausalLossWeights::zero());
        let users = g.value(f.users_target).clone();
        let items = g.value(f.items_target).clone();
        let mut out = Vec::with_capacity(sets.len());
        for chunk in sets.chunks(64) {
            let mut pairs = Vec::new();
            for s in chunk {
                if s.user >= self.spec.num_users {
                    return Err(Error::InvalidInput(format!("candidate user {} out of range", s.user)));
                }
                for item in s.items() {
                    if item >= self.spec.target_items {
                        return Err(Error::InvalidInput(format!("candidate item {item} out of range")));
                    }
                    pairs.push(LabeledPair { user: s.user, item, label: 0.0 });
                }
            }
            let mut g = Graph::new();
            let p = self.store.bind_frozen(&mut g);
            let u = g.constant(users.clone());
            let v = g.constant(items.clone());
            let c = self.confounders(&mut g, &inputs.c_target);
            let y = self.score_pairs(&mut g, &p, &self.pred_target, u, v, c, &pairs);
            let scores = g.value(y).as_slice();
            let mut offset = 0;
            for s in chunk {
                let n = 1 + s.negatives.len();
                out.push(ScoredCandidates {
                    positive_item: s.positive_item,
                    scores: s.items().zip(scores[offset..offset + n].iter().copied()).collect(),
                });
                offset += n;
            }
        }
        Ok(out)
    }
}
