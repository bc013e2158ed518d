use serde::{Deserialize, Serialize};

use super::dag::AdjacencyDag;
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Graph, Var};

pub const EPS_LOG: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CausalLossWeights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
}

impl Default for CausalLossWeights {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 1.0,
            alpha3: 0.1,
            alpha4: 0.01,
        }
    }
}

impl CausalLossWeights {
    pub fn zero() -> Self {
        Self {
            alpha1: 0.0,
            alpha2: 0.0,
            alpha3: 0.0,
            alpha4: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha1, self.alpha2, self.alpha3, self.alpha4];
        if all.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidInput(format!("causal loss weights must be finite and non-negative: {all:?}")));
        }
        Ok(())
    }
}

/// Rows of (attributes ∥ preferences), width 2k.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmBatch {
    pub b: DenseMatrix,
    pub k: usize,
}

impl ScmBatch {
    pub fn new(b: DenseMatrix, k: usize) -> Result<Self> {
        if k == 0 || b.cols() != 2 * k {
            return Err(Error::Shape(format!("batch width {} is not 2k for k = {k}", b.cols())));
        }
        Ok(Self { b, k })
    }

    pub fn from_parts(attributes: &DenseMatrix, preferences: &DenseMatrix) -> Result<Self> {
        if attributes.shape() != preferences.shape() {
            return Err(Error::Shape(format!(
                "attributes {:?} and preferences {:?} differ",
                attributes.shape(),
                preferences.shape()
            )));
        }
        Self::new(DenseMatrix::hconcat(&[attributes, preferences]), attributes.cols())
    }

    pub fn len(&self) -> usize {
        self.b.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.b.rows() == 0
    }
}

fn check_pair(batch: &ScmBatch, dag: &AdjacencyDag) -> Result<()> {
    if batch.k != dag.k {
        return Err(Error::Shape(format!("batch k = {} but dag k = {}", batch.k, dag.k)));
    }
    Ok(())
}

/// Mean squared residual of rows against their reconstruction `b A`.
pub fn reconstruction_var(g: &mut Graph, b: Var, a: Var) -> Var {
    let n = g.value(b).rows().max(1);
    let recon = g.matmul(b, a);
    let r = g.sub(b, recon);
    let sq = g.hadamard(r, r);
    let total = g.sum(sq);
    g.scale(total, 1.0 / n as f64)
}

#[derive(Debug, Clone, Copy)]
pub struct StructuralVars {
    pub dag: Var,
    pub path: Var,
    pub root: Var,
    pub l1: Var,
}

pub fn structural_vars(g: &mut Graph, a: Var, k: usize) -> StructuralVars {
    let dag = g.acyclicity(a);
    let pref_rows = g.slice_rows(a, k, 2 * k);
    let back = g.slice_cols(pref_rows, 0, k);
    let path = g.abs_sum(back);
    let col_norms = g.col_abs_sum(a);
    let pref_norms = g.slice_cols(col_norms, k, 2 * k);
    let shifted = g.add_scalar(pref_norms, EPS_LOG);
    let logs = g.log(shifted);
    let sum_logs = g.sum(logs);
    let root = g.scale(sum_logs, -1.0);
    let l1 = g.abs_sum(a);
    StructuralVars { dag, path, root, l1 }
}

pub fn weighted_structural(g: &mut Graph, s: &StructuralVars, w: &CausalLossWeights) -> Var {
    let terms = [(s.dag, w.alpha1), (s.path, w.alpha2), (s.root, w.alpha3), (s.l1, w.alpha4)];
    let mut acc = g.scale(terms[0].0, terms[0].1);
    for &(v, weight) in &terms[1..] {
        let scaled = g.scale(v, weight);
        acc = g.add(acc, scaled);
    }
    acc
}

/// L_rec + α1 L_dag + α2 L_path + α3 L_root + α4 L_l1 for one level.
pub fn level_causal_var(g: &mut Graph, b: Var, a: Var, k: usize, w: &CausalLossWeights) -> Var {
    let rec = reconstruction_var(g, b, a);
    let s = structural_vars(g, a, k);
    let st = weighted_structural(g, &s, w);
    g.add(rec, st)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructuralLosses {
    pub dag: f64,
    pub path: f64,
    pub root: f64,
    pub l1: f64,
}

pub fn reconstruction_loss(batch: &ScmBatch, dag: &AdjacencyDag) -> Result<f64> {
    check_pair(batch, dag)?;
    let mut g = Graph::new();
    let b = g.constant(batch.b.clone());
    let a = g.constant(dag.a.clone());
    let out = reconstruction_var(&mut g, b, a);
    Ok(g.scalar(out))
}

pub fn structural_losses(dag: &AdjacencyDag) -> Result<StructuralLosses> {
    if !dag.a.is_finite() {
        return Err(Error::NonFinite("adjacency matrix".into()));
    }
    let mut g = Graph::new();
    let a = g.constant(dag.a.clone());
    let s = structural_vars(&mut g, a, dag.k);
    Ok(StructuralLosses {
        dag: g.scalar(s.dag),
        path: g.scalar(s.path),
        root: g.scalar(s.root),
        l1: g.scalar(s.l1),
    })
}

pub fn level_causal_loss(batch: &ScmBatch, dag: &AdjacencyDag, w: &CausalLossWeights) -> Result<f64> {
    check_pair(batch, dag)?;
    w.validate()?;
    let rec = reconstruction_loss(batch, dag)?;
    let s = structural_losses(dag)?;
    Ok(rec + w.alpha1 * s.dag + w.alpha2 * s.path + w.alpha3 * s.root + w.alpha4 * s.l1)
}

pub fn dual_causal_loss(
    batch_spe: &ScmBatch,
    dag_spe: &AdjacencyDag,
    batch_sha: &ScmBatch,
    dag_sha: &AdjacencyDag,
    w: &CausalLossWeights,
) -> Result<f64> {
    Ok(level_causal_loss(batch_spe, dag_spe, w)? + level_causal_loss(batch_sha, dag_sha, w)?)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::causal::dag::DagLevel;
    use crate::numerics::{grad_check_param, ParamStore};

    fn dag(a: DenseMatrix) -> AdjacencyDag {
        AdjacencyDag::new(a, DagLevel::Specific).unwrap()
    }

    #[test]
    fn reconstruction_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = DenseMatrix::random_normal(5, 4, 1.0, &mut rng);
        let batch = ScmBatch::new(b.clone(), 2).unwrap();
        let zero = reconstruction_loss(&batch, &AdjacencyDag::zeros(DagLevel::Shared, 2)).unwrap();
        let mean_sq: f64 = (0..5).map(|i| b.row(i).iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / 5.0;
        assert!((zero - mean_sq).abs() < 1e-12);
        assert_eq!(reconstruction_loss(&batch, &dag(DenseMatrix::identity(4))).unwrap(), 0.0);
    }

    #[test]
    fn reconstruction_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = DenseMatrix::random_normal(2, 6, 1.0, &mut rng);
        let a = DenseMatrix::random_normal(6, 6, 1.0, &mut rng);
        let mut oracle = 0.0;
        for i in 0..2 {
            for j in 0..6 {
                let mut rec = 0.0;
                for l in 0..6 {
                    rec += a[(l, j)] * b[(i, l)];
                }
                oracle += (b[(i, j)] - rec).powi(2);
            }
        }
        oracle /= 2.0;
        let got = reconstruction_loss(&ScmBatch::new(b, 3).unwrap(), &dag(a)).unwrap();
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn structural_at_zero() {
        let k = 3;
        let s = structural_losses(&AdjacencyDag::zeros(DagLevel::Specific, k)).unwrap();
        assert_eq!((s.dag, s.path, s.l1), (0.0, 0.0, 0.0));
        assert!((s.root - k as f64 * -(EPS_LOG.ln())).abs() < 1e-9);
    }

    #[test]
    fn unit_preference_columns_have_no_root_penalty() {
        let mut a = DenseMatrix::zeros(4, 4);
        a[(0, 2)] = 0.5;
        a[(1, 2)] = -0.5;
        a[(0, 3)] = 1.0;
        let s = structural_losses(&dag(a)).unwrap();
        assert!(s.root.abs() < 1e-7);
    }

    #[test]
    fn single_backward_edge_path() {
        let mut a = DenseMatrix::zeros(4, 4);
        a[(3, 0)] = 0.7;
        let s = structural_losses(&dag(a)).unwrap();
        assert_eq!(s.path, 0.7);
        assert_eq!(s.l1, 0.7);
    }

    #[test]
    fn level_loss_weight_collapse_and_series_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = ScmBatch::new(DenseMatrix::random_normal(7, 4, 1.0, &mut rng), 2).unwrap();
        let d = dag(DenseMatrix::random_normal(4, 4, 0.3, &mut rng));
        let rec = reconstruction_loss(&batch, &d).unwrap();
        assert_eq!(level_causal_loss(&batch, &d, &CausalLossWeights::zero()).unwrap(), rec);

        let cycle = dag(DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap());
        let w = CausalLossWeights { alpha1: 1.0, ..CausalLossWeights::zero() };
        let zero_batch = ScmBatch::new(DenseMatrix::zeros(3, 2), 1).unwrap();
        let mut series = 0.0;
        let mut term = 1.0;
        for n in 1..30 {
            term /= n as f64;
            if n % 2 == 0 {
                series += 2.0 * term;
            }
        }
        let got = level_causal_loss(&zero_batch, &cycle, &w).unwrap();
        assert!((got - series).abs() < 1e-12);
        assert!((got - (2.0 * 1f64.cosh() - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn dual_loss_is_additive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b1 = ScmBatch::new(DenseMatrix::random_normal(4, 6, 1.0, &mut rng), 3).unwrap();
        let b2 = ScmBatch::new(DenseMatrix::random_normal(8, 6, 1.0, &mut rng), 3).unwrap();
        let d1 = dag(DenseMatrix::random_normal(6, 6, 0.2, &mut rng));
        let d2 = dag(DenseMatrix::random_normal(6, 6, 0.2, &mut rng));
        let w = CausalLossWeights::default();
        let single = level_causal_loss(&b1, &d1, &w).unwrap();
        assert_eq!(dual_causal_loss(&b1, &d1, &b1, &d1, &w).unwrap(), 2.0 * single);
        assert_eq!(
            dual_causal_loss(&b1, &d1, &b2, &d2, &w).unwrap(),
            single + level_causal_loss(&b2, &d2, &w).unwrap()
        );
        let zb = ScmBatch::new(DenseMatrix::zeros(2, 6), 3).unwrap();
        let zd = AdjacencyDag::zeros(DagLevel::Shared, 3);
        assert_eq!(dual_causal_loss(&zb, &zd, &zb, &zd, &CausalLossWeights::zero()).unwrap(), 0.0);
    }

    #[test]
    fn composite_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = 3;
        let mut store = ParamStore::new();
        let a = store.add("a", DenseMatrix::random_normal(2 * k, 2 * k, 0.3, &mut rng));
        let b = DenseMatrix::random_normal(10, 2 * k, 1.0, &mut rng);
        let w = CausalLossWeights::default();
        let r = grad_check_param(
            &store,
            a,
            |g, p| {
                let bv = g.constant(b.clone());
                level_causal_var(g, bv, p.var(a), k, &w)
            },
            1e-5,
        )
        .unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let batch = ScmBatch::new(DenseMatrix::zeros(2, 4), 2).unwrap();
        assert!(reconstruction_loss(&batch, &AdjacencyDag::zeros(DagLevel::Shared, 3)).is_err());
        assert!(ScmBatch::new(DenseMatrix::zeros(2, 5), 2).is_err());
        let bad = CausalLossWeights { alpha3: -1.0, ..Default::default() };
        assert!(level_causal_loss(&batch, &AdjacencyDag::zeros(DagLevel::Shared, 2), &bad).is_err());
    }
}
