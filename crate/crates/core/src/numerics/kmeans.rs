//! Lloyd's k-means with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DenseMatrix;
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeans {
    /// J x D.
    pub centroids: DenseMatrix,
    pub assignments: Vec<usize>,
    /// Inertia after each assignment step, in order.
    pub inertia_history: Vec<f64>,
    pub converged: bool,
}

impl KMeans {
    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &DenseMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(point, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn seed_plus_plus(x: &DenseMatrix, j: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let n = x.rows();
    let mut centroids = DenseMatrix::zeros(j, x.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(first))).collect();

    for c in 1..j {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // every point coincides with a chosen centre
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(pick)));
        }
    }
    centroids
}

/// Clusters the rows of `x` into `j` groups. Deterministic given `seed`.
pub fn kmeans(x: &DenseMatrix, j: usize, seed: u64) -> Result<KMeans> {
    let n = x.rows();
    if j == 0 {
        return Err(Error::InvalidInput("k-means needs at least one cluster".into()));
    }
    if n < j {
        return Err(Error::InvalidInput(format!("k-means with {j} clusters on only {n} points")));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("k-means input".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(x, j, &mut rng);
    let mut assignments = vec![usize::MAX; n];
    let mut inertia_history = Vec::new();
    let mut converged = false;

    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        let mut inertia = 0.0;
        for i in 0..n {
            let (c, d) = nearest(x.row(i), &centroids);
            inertia += d;
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }
        inertia_history.push(inertia);
        if !changed {
            converged = true;
            break;
        }

        let mut sums = DenseMatrix::zeros(j, x.cols());
        let mut counts = vec![0usize; j];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums.row_mut(c).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for c in 0..j {
            // empty clusters keep their previous centre
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
    }
    Ok(KMeans {
        centroids,
        assignments,
        inertia_history,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use rand_distr::{Distribution, Normal};

    use super::*;

    fn mean_of(x: &DenseMatrix, rows: &[usize]) -> Vec<f64> {
        (0..x.cols())
            .map(|j| rows.iter().map(|&i| x[(i, j)]).sum::<f64>() / rows.len() as f64)
            .collect()
    }

    fn partition_inertia(x: &DenseMatrix, a: &[usize], b: &[usize]) -> f64 {
        let (ma, mb) = (mean_of(x, a), mean_of(x, b));
        a.iter().map(|&i| sq_dist(x.row(i), &ma)).sum::<f64>() + b.iter().map(|&i| sq_dist(x.row(i), &mb)).sum::<f64>()
    }

    #[test]
    fn single_cluster_is_column_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DenseMatrix::random_normal(17, 3, 1.0, &mut rng);
        let km = kmeans(&x, 1, 5).unwrap();
        assert!(km.centroids.max_abs_diff(&x.column_means()) < 1e-12);
    }

    #[test]
    fn separated_clouds_match_best_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let n = 12;
        let x = DenseMatrix::from_fn(n, 2, |i, _| if i < 6 { 0.0 } else { 20.0 } + noise.sample(&mut rng));

        // exhaustive oracle over all non-trivial 2-partitions
        let mut best = (f64::INFINITY, Vec::new(), Vec::new());
        for mask in 1u32..(1 << (n - 1)) {
            let a: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            let b: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 0).collect();
            let v = partition_inertia(&x, &a, &b);
            if v < best.0 {
                best = (v, a, b);
            }
        }
        let mut expected = [mean_of(&x, &best.1), mean_of(&x, &best.2)];
        expected.sort_by(|p, q| p[0].total_cmp(&q[0]));

        let km = kmeans(&x, 2, 3).unwrap();
        let mut got = [km.centroids.row(0).to_vec(), km.centroids.row(1).to_vec()];
        got.sort_by(|p, q| p[0].total_cmp(&q[0]));
        for (g, e) in got.iter().zip(&expected) {
            for (a, b) in g.iter().zip(e) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn duplicates_do_not_produce_nan() {
        let x = DenseMatrix::filled(5, 3, 2.5);
        let km = kmeans(&x, 3, 0).unwrap();
        assert!(km.centroids.is_finite());
        assert!(km.assignments.iter().all(|&a| a == km.assignments[0]));
        assert_eq!(km.inertia(), 0.0);
    }

    #[test]
    fn inertia_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = DenseMatrix::random_normal(200, 4, 1.0, &mut rng);
        let km = kmeans(&x, 7, 2).unwrap();
        assert!(km.inertia_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn too_few_points_is_an_error() {
        assert!(kmeans(&DenseMatrix::zeros(2, 2), 3, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DenseMatrix::random_normal(50, 2, 1.0, &mut rng);
        let a = kmeans(&x, 4, 9).unwrap();
        let b = kmeans(&x, 4, 9).unwrap();
        assert_eq!(a.centroids, b.centroids);
        assert_eq!(a.assignments, b.assignments);
    }
}
