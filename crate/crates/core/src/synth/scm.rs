use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::causal::ScmBatch;
use crate::numerics::DenseMatrix;

/// Linear SCM whose only edges run from attribute dimensions to preference
/// dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearScm {
    pub k: usize,
    /// Ground-truth 2k x 2k weights.
    pub weights: DenseMatrix,
    pub attribute_std: f64,
    pub noise_std: f64,
}

impl LinearScm {
    /// Each attribute -> preference edge is present with probability 0.4,
    /// with at least two parents per preference and weight magnitudes in
    /// [0.8, 1.5].
    pub fn random(k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = DenseMatrix::zeros(2 * k, 2 * k);
        let min_parents = k.min(2);
        for j in 0..k {
            let mut chosen: Vec<usize> = (0..k).filter(|_| rng.random_bool(0.4)).collect();
            while chosen.len() < min_parents {
                let p = rng.random_range(0..k);
                if !chosen.contains(&p) {
                    chosen.push(p);
                }
            }
            for p in chosen {
                let mag = rng.random_range(0.8..1.5);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                weights[(p, k + j)] = sign * mag;
            }
        }
        Self {
            k,
            weights,
            attribute_std: 0.5,
            noise_std: 1.0,
        }
    }

    pub fn true_edges(&self) -> Vec<(usize, usize)> {
        let d = 2 * self.k;
        let mut out = Vec::new();
        for i in 0..d {
            for j in 0..d {
                if self.weights[(i, j)] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn sample(&self, n: usize, seed: u64) -> ScmBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.k;
        let attr = Normal::new(0.0, self.attribute_std).expect("positive std");
        let noise = Normal::new(0.0, self.noise_std).expect("positive std");
        let mut b = DenseMatrix::zeros(n, 2 * k);
        for r in 0..n {
            for i in 0..k {
                b[(r, i)] = attr.sample(&mut rng);
            }
            for j in 0..k {
                let mut v = noise.sample(&mut rng);
                for i in 0..k {
                    v += b[(r, i)] * self.weights[(i, k + j)];
                }
                b[(r, k + j)] = v;
            }
        }
        ScmBatch::new(b, k).expect("width 2k by construction")
    }
}
