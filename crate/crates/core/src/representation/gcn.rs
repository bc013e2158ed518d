//! Parameter-free graph convolution over the user–item bipartite graph.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{CsrMatrix, DenseMatrix, Graph, Var};

pub const DEFAULT_LAYERS: usize = 2;

/// Symmetric-normalised adjacency with self-loops, D^{-1/2}(A + I)D^{-1/2},
/// over `num_users + num_items` nodes (users first).
pub fn normalized_adjacency(num_users: usize, num_items: usize, pairs: &[(usize, usize)]) -> Result<CsrMatrix> {
    let n = num_users + num_items;
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(pairs.len());
    for &(u, i) in pairs {
        if u >= num_users || i >= num_items {
            return Err(Error::Shape(format!(
                "edge ({u}, {i}) outside a {num_users}x{num_items} interaction graph"
            )));
        }
        edges.push((u, num_users + i));
    }
    edges.sort_unstable();
    edges.dedup();

    let mut degree = vec![1.0f64; n];
    for &(a, b) in &edges {
        degree[a] += 1.0;
        degree[b] += 1.0;
    }
    let mut triplets = Vec::with_capacity(2 * edges.len() + n);
    for (v, d) in degree.iter().enumerate() {
        triplets.push((v, v, 1.0 / d));
    }
    for &(a, b) in &edges {
        let w = 1.0 / (degree[a] * degree[b]).sqrt();
        triplets.push((a, b, w));
        triplets.push((b, a, w));
    }
    Ok(CsrMatrix::from_triplets(n, n, &triplets))
}

/// Propagates stacked (users; items) embeddings and returns the mean of the layer outputs.
pub fn propagate(g: &mut Graph, adj: &Arc<CsrMatrix>, x: Var, layers: usize) -> Var {
    assert!(layers >= 1, "at least one propagation layer");
    let mut h = x;
    let mut outputs = Vec::with_capacity(layers);
    for _ in 0..layers {
        h = g.sparse_matmul(adj.clone(), h);
        outputs.push(h);
    }
    let mut acc = outputs[0];
    for &o in &outputs[1..] {
        acc = g.add(acc, o);
    }
    g.scale(acc, 1.0 / layers as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEmbeddings {
    /// m x k.
    pub e_u: DenseMatrix,
    /// n x k.
    pub e_v: DenseMatrix,
}

/// Plain-matrix form of the propagation.
pub fn gcn_propagate(
    pairs: &[(usize, usize)],
    e_ui: &DenseMatrix,
    e_vi: &DenseMatrix,
    layers: usize,
) -> Result<GraphEmbeddings> {
    if e_ui.cols() != e_vi.cols() {
        return Err(Error::Shape(format!(
            "user width {} differs from item width {}",
            e_ui.cols(),
            e_vi.cols()
        )));
    }
    let (m, n) = (e_ui.rows(), e_vi.rows());
    let adj = Arc::new(normalized_adjacency(m, n, pairs)?);
    let mut g = Graph::new();
    let x = g.constant(DenseMatrix::vconcat(&[e_ui, e_vi]));
    let out = propagate(&mut g, &adj, x, layers);
    let v = g.value(out);
    Ok(GraphEmbeddings {
        e_u: v.slice_rows(0, m),
        e_v: v.slice_rows(m, m + n),
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn no_edges_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = DenseMatrix::random_normal(3, 4, 1.0, &mut rng);
        let v = DenseMatrix::random_normal(2, 4, 1.0, &mut rng);
        let out = gcn_propagate(&[], &u, &v, 2).unwrap();
        assert_eq!(out.e_u, u);
        assert_eq!(out.e_v, v);
    }

    #[test]
    fn single_edge_one_layer() {
        let u = DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let v = DenseMatrix::from_rows(&[vec![0.0, 3.0]]).unwrap();
        let out = gcn_propagate(&[(0, 0)], &u, &v, 1).unwrap();
        // both nodes have degree 2 with the self-loop: weights 1/2 and 1/sqrt(2*2)
        assert_eq!(out.e_u.row(0), &[0.5, 1.5]);
        assert_eq!(out.e_v.row(0), &[0.5, 1.5]);
    }

    #[test]
    fn two_layer_readout_is_layer_mean() {
        let u = DenseMatrix::from_rows(&[vec![2.0], vec![0.0]]).unwrap();
        let v = DenseMatrix::from_rows(&[vec![4.0]]).unwrap();
        let pairs = [(0, 0), (1, 0)];
        // hand oracle: degrees u0=2, u1=2, v0=3
        let s = |a: f64, b: f64| 1.0 / (a * b).sqrt();
        let x = [2.0, 0.0, 4.0];
        let h1 = [
            x[0] / 2.0 + s(2.0, 3.0) * x[2],
            x[1] / 2.0 + s(2.0, 3.0) * x[2],
            x[2] / 3.0 + s(2.0, 3.0) * (x[0] + x[1]),
        ];
        let h2 = [
            h1[0] / 2.0 + s(2.0, 3.0) * h1[2],
            h1[1] / 2.0 + s(2.0, 3.0) * h1[2],
            h1[2] / 3.0 + s(2.0, 3.0) * (h1[0] + h1[1]),
        ];
        let out = gcn_propagate(&pairs, &u, &v, 2).unwrap();
        assert!((out.e_u[(0, 0)] - (h1[0] + h2[0]) / 2.0).abs() < 1e-12);
        assert!((out.e_u[(1, 0)] - (h1[1] + h2[1]) / 2.0).abs() < 1e-12);
        assert!((out.e_v[(0, 0)] - (h1[2] + h2[2]) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn user_permutation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = DenseMatrix::random_normal(4, 3, 1.0, &mut rng);
        let v = DenseMatrix::random_normal(3, 3, 1.0, &mut rng);
        let pairs = [(0, 0), (1, 0), (1, 2), (3, 1), (2, 2)];
        let perm = [2, 0, 3, 1];
        let pu = DenseMatrix::from_fn(4, 3, |i, j| u[(perm[i], j)]);
        let inverse: Vec<usize> = (0..4).map(|x| perm.iter().position(|&p| p == x).unwrap()).collect();
        let ppairs: Vec<(usize, usize)> = pairs.iter().map(|&(a, b)| (inverse[a], b)).collect();
        let base = gcn_propagate(&pairs, &u, &v, 2).unwrap();
        let moved = gcn_propagate(&ppairs, &pu, &v, 2).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                assert!((moved.e_u[(i, j)] - base.e_u[(perm[i], j)]).abs() < 1e-12);
            }
        }
        assert!(moved.e_v.max_abs_diff(&base.e_v) < 1e-12);
    }
}
