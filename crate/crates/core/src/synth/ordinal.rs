use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as NormalCdf};

use crate::discovery::DiscreteData;

/// Ordinal SCM over ternary features and one binary target. Each node
/// thresholds a weighted sum of its parents' values plus Gaussian noise;
/// root nodes are uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalScm {
    /// Features are columns `0..target`; the target is the last column.
    pub target: usize,
    pub parents: Vec<Vec<(usize, f64)>>,
    pub order: Vec<usize>,
    pub noise_std: f64,
}

impl OrdinalScm {
    pub fn random(num_features: usize, edge_prob: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = num_features + 1;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut parents = vec![Vec::new(); n];
        for (pos, &child) in order.iter().enumerate() {
            for &parent in &order[..pos] {
                if rng.random_bool(edge_prob) {
                    let mag = rng.random_range(0.8..1.5);
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    parents[child].push((parent, sign * mag));
                }
            }
            parents[child].sort_by_key(|p| p.0);
        }
        Self {
            target: num_features,
            parents,
            order,
            noise_std: 0.5,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.parents.len()
    }

    pub fn levels(&self, v: usize) -> usize {
        if v == self.target {
            2
        } else {
            3
        }
    }

    fn value(&self, v: usize, code: u8) -> f64 {
        if v == self.target {
            2.0 * code as f64 - 1.0
        } else {
            code as f64 - 1.0
        }
    }

    /// P(v = code | parents) for every code, given codes of all variables.
    pub fn conditional(&self, v: usize, codes: &[u8]) -> Vec<f64> {
        let levels = self.levels(v);
        if self.parents[v].is_empty() {
            return vec![1.0 / levels as f64; levels];
        }
        let mu: f64 = self.parents[v].iter().map(|&(p, w)| w * self.value(p, codes[p])).sum();
        let phi = NormalCdf::new(mu, self.noise_std).expect("positive std");
        if levels == 2 {
            let p0 = phi.cdf(0.0);
            vec![p0, 1.0 - p0]
        } else {
            let lo = phi.cdf(-0.5);
            let hi = phi.cdf(0.5);
            vec![lo, hi - lo, 1.0 - hi]
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> DiscreteData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, self.noise_std).expect("positive std");
        let mut columns = vec![Vec::with_capacity(n); self.num_vars()];
        let mut codes = vec![0u8; self.num_vars()];
        for _ in 0..n {
            for &v in &self.order {
                let levels = self.levels(v) as u8;
                codes[v] = if self.parents[v].is_empty() {
                    rng.random_range(0..levels)
                } else {
                    let s: f64 = self.parents[v].iter().map(|&(p, w)| w * self.value(p, codes[p])).sum::<f64>()
                        + noise.sample(&mut rng);
                    if levels == 2 {
                        (s > 0.0) as u8
                    } else if s < -0.5 {
                        0
                    } else if s <= 0.5 {
                        1
                    } else {
                        2
                    }
                };
                columns[v].push(codes[v]);
            }
        }
        DiscreteData::new(columns).expect("equal-length columns")
    }

    /// Exact joint distribution as (codes, probability) pairs.
    pub fn joint(&self) -> Vec<(Vec<u8>, f64)> {
        let n = self.num_vars();
        let mut out = Vec::new();
        let mut codes = vec![0u8; n];
        loop {
            let mut p = 1.0;
            for v in 0..n {
                p *= self.conditional(v, &codes)[codes[v] as usize];
            }
            out.push((codes.clone(), p));
            let mut v = 0;
            loop {
                if v == n {
                    return out;
                }
                codes[v] += 1;
                if (codes[v] as usize) < self.levels(v) {
                    break;
                }
                codes[v] = 0;
                v += 1;
            }
        }
    }

    /// Parents, children and co-parents of the target in the true graph.
    pub fn graph_markov_blanket(&self) -> Vec<usize> {
        let t = self.target;
        let mut mb: Vec<usize> = self.parents[t].iter().map(|p| p.0).collect();
        for c in 0..self.num_vars() {
            if self.parents[c].iter().any(|p| p.0 == t) {
                mb.push(c);
                mb.extend(self.parents[c].iter().map(|p| p.0).filter(|&p| p != t));
            }
        }
        mb.sort_unstable();
        mb.dedup();
        mb
    }
}
