use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dag::AdjacencyDag;
use crate::error::{Error, Result};
use crate::numerics::{Bound, DenseMatrix, Graph, ParamId, ParamStore, Var};
use crate::representation::glorot;

/// How preferences are read off the structure once the observed preference
/// dimensions are replaced by zeros.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMode {
    /// One application: (e_att ∥ 0) A.
    #[default]
    SingleStep,
    /// Propagate until the preference block settles: P = e_att A_ap + P A_pp.
    FixedPoint,
}

/// Graph form of [`infer_invariant`].
pub fn invariant_var(g: &mut Graph, e_att: Var, a: Var, k: usize, mode: InferenceMode) -> Var {
    let rows = g.value(e_att).rows();
    let zeros = g.constant(DenseMatrix::zeros(rows, k));
    let input = g.hconcat(&[e_att, zeros]);
    let out = g.matmul(input, a);
    let single = g.slice_cols(out, k, 2 * k);
    match mode {
        InferenceMode::SingleStep => single,
        InferenceMode::FixedPoint => {
            let pref_rows = g.slice_rows(a, k, 2 * k);
            let a_pp = g.slice_cols(pref_rows, k, 2 * k);
            let mut p = single;
            for _ in 1..k {
                let carried = g.matmul(p, a_pp);
                p = g.add(single, carried);
            }
            p
        }
    }
}

/// Preferences implied by attributes alone, m x k.
pub fn infer_invariant(dag: &AdjacencyDag, e_att: &DenseMatrix, mode: InferenceMode) -> Result<DenseMatrix> {
    if e_att.cols() != dag.k {
        return Err(Error::Shape(format!("attribute width {} but dag k = {}", e_att.cols(), dag.k)));
    }
    let mut g = Graph::new();
    let x = g.constant(e_att.clone());
    let a = g.constant(dag.a.clone());
    let out = invariant_var(&mut g, x, a, dag.k, mode);
    Ok(g.value(out).clone())
}

/// Two-way attention blend with score(x) = tanh(x W) q.
#[derive(Debug, Clone, Copy)]
pub struct Fusion {
    pub w: ParamId,
    pub q: ParamId,
}

impl Fusion {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, k: usize, rng: &mut R) -> Self {
        Self {
            w: store.add(format!("{name}.w"), glorot(k, k, rng)),
            q: store.add(format!("{name}.q"), DenseMatrix::zeros(k, 1)),
        }
    }

    /// Returns the blend (m x k) and the weights (m x 2).
    pub fn forward(&self, g: &mut Graph, p: &Bound, e_a: Var, e_b: Var) -> (Var, Var) {
        let sa = self.score(g, p, e_a);
        let sb = self.score(g, p, e_b);
        let logits = g.hconcat(&[sa, sb]);
        let weights = g.softmax_rows(logits);
        let wa = g.slice_cols(weights, 0, 1);
        let wb = g.slice_cols(weights, 1, 2);
        let pa = g.mul_col(e_a, wa);
        let pb = g.mul_col(e_b, wb);
        (g.add(pa, pb), weights)
    }

    fn score(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        let h = g.matmul(x, p.var(self.w));
        let h = g.tanh(h);
        g.matmul(h, p.var(self.q))
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.w, self.q]
    }
}

pub fn fuse_attention(
    store: &ParamStore,
    fusion: &Fusion,
    e_a: &DenseMatrix,
    e_b: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    if e_a.shape() != e_b.shape() {
        return Err(Error::Shape(format!("fusion inputs {:?} and {:?}", e_a.shape(), e_b.shape())));
    }
    let mut g = Graph::new();
    let p = store.bind_frozen(&mut g);
    let a = g.constant(e_a.clone());
    let b = g.constant(e_b.clone());
    let (out, w) = fusion.forward(&mut g, &p, a, b);
    Ok((g.value(out).clone(), g.value(w).clone()))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::causal::dag::DagLevel;
    use crate::numerics::grad_check_param;

    #[test]
    fn single_edge_maps_one_dimension() {
        let k = 3;
        let mut dag = AdjacencyDag::zeros(DagLevel::Specific, k);
        dag.a[(1, k + 2)] = 0.8;
        let e = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 0.0]]).unwrap();
        let out = infer_invariant(&dag, &e, InferenceMode::SingleStep).unwrap();
        assert_eq!(out.row(0), &[0.0, 0.0, 1.6]);
        assert_eq!(out.row(1), &[0.0, 0.0, 0.4]);
        let zero = infer_invariant(&AdjacencyDag::zeros(DagLevel::Shared, k), &e, InferenceMode::SingleStep).unwrap();
        assert_eq!(zero, DenseMatrix::zeros(2, k));
    }

    #[test]
    fn matches_triple_loop_and_ignores_other_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let k = 4;
        let a = DenseMatrix::random_normal(2 * k, 2 * k, 1.0, &mut rng);
        let e = DenseMatrix::random_normal(5, k, 1.0, &mut rng);
        let dag = AdjacencyDag::new(a.clone(), DagLevel::Specific).unwrap();
        let out = infer_invariant(&dag, &e, InferenceMode::SingleStep).unwrap();
        for u in 0..5 {
            for j in 0..k {
                let mut s = 0.0;
                for i in 0..k {
                    s += e[(u, i)] * a[(i, k + j)];
                }
                assert!((out[(u, j)] - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fixed_point_follows_preference_chains() {
        let k = 2;
        let mut dag = AdjacencyDag::zeros(DagLevel::Specific, k);
        dag.a[(0, k)] = 2.0;
        dag.a[(k, k + 1)] = 0.5;
        let e = DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(infer_invariant(&dag, &e, InferenceMode::SingleStep).unwrap().row(0), &[2.0, 0.0]);
        assert_eq!(infer_invariant(&dag, &e, InferenceMode::FixedPoint).unwrap().row(0), &[2.0, 1.0]);
    }

    #[test]
    fn fusion_starts_even_and_blends_equal_inputs_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let f = Fusion::new(&mut store, "fuse", 3, &mut rng);
        let a = DenseMatrix::random_normal(4, 3, 1.0, &mut rng);
        let b = DenseMatrix::random_normal(4, 3, 1.0, &mut rng);
        let (_, w) = fuse_attention(&store, &f, &a, &b).unwrap();
        assert!(w.as_slice().iter().all(|&x| x == 0.5));

        *store.get_mut(f.q) = DenseMatrix::random_normal(3, 1, 1.0, &mut rng);
        let (same, _) = fuse_attention(&store, &f, &a, &a).unwrap();
        assert!(same.max_abs_diff(&a) < 1e-15);
        let (out, w) = fuse_attention(&store, &f, &a, &b).unwrap();
        for u in 0..4 {
            assert!((w[(u, 0)] + w[(u, 1)] - 1.0).abs() < 1e-15);
            for j in 0..3 {
                let (lo, hi) = (a[(u, j)].min(b[(u, j)]), a[(u, j)].max(b[(u, j)]));
                assert!(out[(u, j)] >= lo - 1e-12 && out[(u, j)] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn fusion_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let f = Fusion::new(&mut store, "fuse", 3, &mut rng);
        store.jitter(0.3, &mut rng);
        let a = DenseMatrix::random_normal(5, 3, 1.0, &mut rng);
        let b = DenseMatrix::random_normal(5, 3, 1.0, &mut rng);
        for id in f.params() {
            let r = grad_check_param(
                &store,
                id,
                |g, p| {
                    let av = g.constant(a.clone());
                    let bv = g.constant(b.clone());
                    let (o, _) = f.forward(g, p, av, bv);
                    let sq = g.hadamard(o, o);
                    g.sum(sq)
                },
                1e-5,
            )
            .unwrap();
            assert!(r.max_rel_error < 1e-4, "{}: {r:?}", store.name(id));
        }
    }
}
