use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{Bound, DenseMatrix, Graph, ParamId, ParamStore, Var};
use crate::representation::{glorot, Affine};

pub const K_IN: usize = 128;
pub const HIDDEN: usize = 64;
pub const K_OUT: usize = 8;

/// Per-domain prediction head: confounder selection, the FC input map and
/// the three-layer MLP.
#[derive(Debug, Clone, Copy)]
pub struct PredictorParams {
    pub k: usize,
    pub w_u: ParamId,
    pub w_uc: ParamId,
    pub w_v: ParamId,
    pub w_vc: ParamId,
    pub fc: Affine,
    pub mlp: [Affine; 3],
}

impl PredictorParams {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, k: usize, rng: &mut R) -> Self {
        Self {
            k,
            w_u: store.add(format!("{name}.w_u"), glorot(k, k, rng)),
            w_uc: store.add(format!("{name}.w_uc"), glorot(k, k, rng)),
            w_v: store.add(format!("{name}.w_v"), glorot(k, k, rng)),
            w_vc: store.add(format!("{name}.w_vc"), glorot(k, k, rng)),
            fc: Affine::new(store, &format!("{name}.fc"), 3 * k, K_IN, rng),
            mlp: [
                Affine::new(store, &format!("{name}.mlp.0"), K_IN, HIDDEN, rng),
                Affine::new(store, &format!("{name}.mlp.1"), HIDDEN, K_OUT, rng),
                Affine::new(store, &format!("{name}.mlp.2"), K_OUT, 1, rng),
            ],
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut out = vec![self.w_u, self.w_uc, self.w_v, self.w_vc];
        out.extend(self.fc.params());
        for layer in &self.mlp {
            out.extend(layer.params());
        }
        out
    }

    /// ψ for each row pair, B x J.
    pub fn selection(&self, g: &mut Graph, p: &Bound, e_u: Var, e_v: Var, c: Var) -> Var {
        let half = |g: &mut Graph, e: Var, w: ParamId, wc: ParamId| {
            let q = g.matmul(e, p.var(w));
            let keys = g.matmul(c, p.var(wc));
            let logits = g.matmul_transb(q, keys);
            g.softmax_rows(logits)
        };
        let a = half(g, e_u, self.w_u, self.w_uc);
        let b = half(g, e_v, self.w_v, self.w_vc);
        let sum = g.add(a, b);
        g.scale(sum, 0.5)
    }

    /// Θ_in = W_fc (e_u ∥ e_v ∥ s) + b with s = Σ_c (1/J) ψ(c) c.
    pub fn backdoor_input(&self, g: &mut Graph, p: &Bound, e_u: Var, e_v: Var, c: Var) -> Var {
        let j = g.value(c).rows();
        let psi = self.selection(g, p, e_u, e_v, c);
        let weighted = g.matmul(psi, c);
        let s = g.scale(weighted, 1.0 / j as f64);
        let input = g.hconcat(&[e_u, e_v, s]);
        self.fc.forward(g, p, input)
    }

    /// Θ_in with the confounder branch removed: only the first 2k rows of W_fc.
    pub fn plain_input(&self, g: &mut Graph, p: &Bound, e_u: Var, e_v: Var) -> Var {
        let w = g.slice_rows(p.var(self.fc.w), 0, 2 * self.k);
        let input = g.hconcat(&[e_u, e_v]);
        let xw = g.matmul(input, w);
        g.add_row(xw, p.var(self.fc.b))
    }

    /// ŷ, B x 1.
    pub fn predict(&self, g: &mut Graph, p: &Bound, theta: Var) -> Var {
        let h = self.mlp[0].forward(g, p, theta);
        let h = g.relu(h);
        let h = self.mlp[1].forward(g, p, h);
        let h = g.relu(h);
        let out = self.mlp[2].forward(g, p, h);
        g.sigmoid(out)
    }

    /// Scores for a batch, with or without confounders.
    pub fn score(&self, g: &mut Graph, p: &Bound, e_u: Var, e_v: Var, c: Option<Var>) -> Var {
        let theta = match c {
            Some(c) => self.backdoor_input(g, p, e_u, e_v, c),
            None => self.plain_input(g, p, e_u, e_v),
        };
        self.predict(g, p, theta)
    }
}

fn row(v: &[f64]) -> DenseMatrix {
    DenseMatrix::row_vector(v)
}

fn check_inputs(params: &PredictorParams, e_u: &[f64], e_v: &[f64], c: &DenseMatrix) -> Result<()> {
    let k = params.k;
    if e_u.len() != k || e_v.len() != k || c.cols() != k {
        return Err(Error::Shape(format!(
            "expected width {k}, got e_u {}, e_v {}, C {}",
            e_u.len(),
            e_v.len(),
            c.cols()
        )));
    }
    if c.rows() == 0 {
        return Err(Error::InvalidInput("confounder subspace has no rows".into()));
    }
    Ok(())
}

/// ψ over the J confounders for one user–item pair.
pub fn selection_weights(
    store: &ParamStore,
    params: &PredictorParams,
    e_u: &[f64],
    e_v: &[f64],
    c: &DenseMatrix,
) -> Result<Vec<f64>> {
    check_inputs(params, e_u, e_v, c)?;
    let mut g = Graph::new();
    let p = store.bind_frozen(&mut g);
    let (u, v, cv) = (g.constant(row(e_u)), g.constant(row(e_v)), g.constant(c.clone()));
    let psi = params.selection(&mut g, &p, u, v, cv);
    Ok(g.value(psi).row(0).to_vec())
}

pub fn backdoor_input(
    store: &ParamStore,
    params: &PredictorParams,
    e_u: &[f64],
    e_v: &[f64],
    c: &DenseMatrix,
) -> Result<Vec<f64>> {
    check_inputs(params, e_u, e_v, c)?;
    let mut g = Graph::new();
    let p = store.bind_frozen(&mut g);
    let (u, v, cv) = (g.constant(row(e_u)), g.constant(row(e_v)), g.constant(c.clone()));
    let theta = params.backdoor_input(&mut g, &p, u, v, cv);
    Ok(g.value(theta).row(0).to_vec())
}

pub fn predict(store: &ParamStore, params: &PredictorParams, theta: &[f64]) -> Result<f64> {
    if theta.len() != K_IN {
        return Err(Error::Shape(format!("Θ_in has width {}, expected {K_IN}", theta.len())));
    }
    let mut g = Graph::new();
    let p = store.bind_frozen(&mut g);
    let t = g.constant(row(theta));
    let y = params.predict(&mut g, &p, t);
    Ok(g.scalar(y))
}
