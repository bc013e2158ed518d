//! Shared/specific preference encoders and the adversarial domain objective.

use rand::Rng;
use serde::Serialize;

use super::layers::{Affine, Mlp2};
use crate::numerics::{Bound, DenseMatrix, Graph, ParamId, ParamStore, Var};

pub const PROB_CLAMP: f64 = 1e-7;
pub const DEFAULT_GRL_LAMBDA: f64 = 1.0;

/// Gradient reversal: identity forward, gradient times −λ backward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grl {
    pub lambda: f64,
}

impl Grl {
    pub fn new(lambda: f64) -> Self {
        assert!(lambda > 0.0, "gradient reversal needs λ > 0");
        Self { lambda }
    }

    pub fn forward(&self, x: &DenseMatrix) -> DenseMatrix {
        x.clone()
    }

    pub fn backward(&self, grad: &DenseMatrix) -> DenseMatrix {
        grad.scale(-self.lambda)
    }

    pub fn apply(&self, g: &mut Graph, x: Var) -> Var {
        g.reverse_grad(x, self.lambda)
    }
}

/// One shared encoder and one specific encoder per domain.
#[derive(Debug, Clone, Copy)]
pub struct Disentangler {
    pub shared: Mlp2,
    pub specific_source: Mlp2,
    pub specific_target: Mlp2,
}

#[derive(Debug, Clone, Copy)]
pub struct PreferenceVars {
    pub sha_s: Var,
    pub sha_t: Var,
    pub spe_s: Var,
    pub spe_t: Var,
}

impl Disentangler {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, k: usize, rng: &mut R) -> Self {
        Self {
            shared: Mlp2::new(store, "enc_shared", k, k, k, rng),
            specific_source: Mlp2::new(store, "enc_specific_source", k, k, k, rng),
            specific_target: Mlp2::new(store, "enc_specific_target", k, k, k, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, e_u_source: Var, e_u_target: Var) -> PreferenceVars {
        PreferenceVars {
            sha_s: self.shared.forward(g, p, e_u_source),
            sha_t: self.shared.forward(g, p, e_u_target),
            spe_s: self.specific_source.forward(g, p, e_u_source),
            spe_t: self.specific_target.forward(g, p, e_u_target),
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        [self.shared, self.specific_source, self.specific_target]
            .iter()
            .flat_map(|m| m.params())
            .collect()
    }
}

/// (e_sha_s, e_sha_t, e_spe_s, e_spe_t) for concrete inputs.
pub fn disentangle(
    store: &ParamStore,
    dis: &Disentangler,
    e_u_source: &DenseMatrix,
    e_u_target: &DenseMatrix,
) -> (DenseMatrix, DenseMatrix, DenseMatrix, DenseMatrix) {
    let mut g = Graph::new();
    let p = store.bind_frozen(&mut g);
    let s = g.constant(e_u_source.clone());
    let t = g.constant(e_u_target.clone());
    let out = dis.forward(&mut g, &p, s, t);
    (
        g.value(out.sha_s).clone(),
        g.value(out.sha_t).clone(),
        g.value(out.spe_s).clone(),
        g.value(out.spe_t).clone(),
    )
}

/// Domain classifier k -> k/2 -> 1 with a sigmoid output; 1 means target.
#[derive(Debug, Clone, Copy)]
pub struct Discriminator {
    pub hidden: Affine,
    pub out: Affine,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, k: usize, rng: &mut R) -> Self {
        let h = (k / 2).max(1);
        Self {
            hidden: Affine::new(store, "disc.0", k, h, rng),
            out: Affine::new(store, "disc.1", h, 1, rng),
        }
    }

    /// Target-domain probability per row, before clamping.
    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        let h = self.hidden.forward(g, p, x);
        let h = g.relu(h);
        let logit = self.out.forward(g, p, h);
        g.sigmoid(logit)
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.hidden.params().into_iter().chain(self.out.params()).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DomainLossVars {
    pub sha_s: Var,
    pub sha_t: Var,
    pub spe_s: Var,
    pub spe_t: Var,
    pub total: Var,
    /// Probabilities that hit the clamp.
    pub clamped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainLossValues {
    pub sha_s: f64,
    pub sha_t: f64,
    pub spe_s: f64,
    pub spe_t: f64,
    pub total: f64,
    pub clamped: usize,
}

impl DomainLossVars {
    pub fn values(&self, g: &Graph) -> DomainLossValues {
        DomainLossValues {
            sha_s: g.scalar(self.sha_s),
            sha_t: g.scalar(self.sha_t),
            spe_s: g.scalar(self.spe_s),
            spe_t: g.scalar(self.spe_t),
            total: g.scalar(self.total),
            clamped: self.clamped,
        }
    }
}

/// −mean log(p) for target rows or −mean log(1 − p) for source rows, with p clamped.
fn bce_mean(g: &mut Graph, prob: Var, target: bool, clamped: &mut usize) -> Var {
    *clamped += g
        .value(prob)
        .as_slice()
        .iter()
        .filter(|&&v| !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&v))
        .count();
    let p = g.clamp(prob, PROB_CLAMP, 1.0 - PROB_CLAMP);
    let q = if target {
        p
    } else {
        let neg = g.scale(p, -1.0);
        g.add_scalar(neg, 1.0)
    };
    let l = g.log(q);
    let m = g.mean(l);
    g.scale(m, -1.0)
}

/// L_dom = γ(L_sha^s + L_spe^s) + (1−γ)(L_sha^t + L_spe^t). Shared embeddings
/// reach the discriminator through the gradient reversal layer.
pub fn domain_losses(
    g: &mut Graph,
    p: &Bound,
    disc: &Discriminator,
    prefs: &PreferenceVars,
    gamma: f64,
    grl: Grl,
) -> DomainLossVars {
    let mut clamped = 0;
    let rs = grl.apply(g, prefs.sha_s);
    let rt = grl.apply(g, prefs.sha_t);
    let d_sha_s = disc.forward(g, p, rs);
    let d_sha_t = disc.forward(g, p, rt);
    let d_spe_s = disc.forward(g, p, prefs.spe_s);
    let d_spe_t = disc.forward(g, p, prefs.spe_t);
    let sha_s = bce_mean(g, d_sha_s, false, &mut clamped);
    let sha_t = bce_mean(g, d_sha_t, true, &mut clamped);
    let spe_s = bce_mean(g, d_spe_s, false, &mut clamped);
    let spe_t = bce_mean(g, d_spe_t, true, &mut clamped);
    if clamped > 0 {
        log::debug!("domain losses: {clamped} discriminator probabilities clamped");
    }
    let src = g.add(sha_s, spe_s);
    let tgt = g.add(sha_t, spe_t);
    let src = g.scale(src, gamma);
    let tgt = g.scale(tgt, 1.0 - gamma);
    let total = g.add(src, tgt);
    DomainLossVars {
        sha_s,
        sha_t,
        spe_s,
        spe_t,
        total,
        clamped,
    }
}
