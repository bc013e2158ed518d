use super::DenseMatrix;

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: Vec<u64>,
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
}

impl Adam {
    pub fn new(lr: f64, params: &[DenseMatrix]) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: vec![0; params.len()],
            m: params.iter().map(|p| DenseMatrix::zeros(p.rows(), p.cols())).collect(),
            v: params.iter().map(|p| DenseMatrix::zeros(p.rows(), p.cols())).collect(),
        }
    }

    /// One update. Parameters whose gradient is `None` are left untouched and
    /// keep their moment estimates and step count.
    pub fn step(&mut self, params: &mut [DenseMatrix], grads: &[Option<DenseMatrix>]) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(params.len(), grads.len(), "one gradient slot per parameter");
        for (idx, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let Some(g) = g else { continue };
            self.t[idx] += 1;
            let t = self.t[idx] as i32;
            let c1 = 1.0 - self.beta1.powi(t);
            let c2 = 1.0 - self.beta2.powi(t);
            let m = self.m[idx].as_mut_slice();
            let v = self.v[idx].as_mut_slice();
            for (((w, &gi), mi), vi) in p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m).zip(v) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![DenseMatrix::from_rows(&[vec![1.0, -2.0]]).unwrap()];
        let mut opt = Adam::new(0.1, &p);
        let g = DenseMatrix::from_rows(&[vec![3.0, -0.5]]).unwrap();
        opt.step(&mut p, &[Some(g)]);
        assert!((p[0][(0, 0)] - 0.9).abs() < 1e-7);
        assert!((p[0][(0, 1)] + 1.9).abs() < 1e-7);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut p = vec![DenseMatrix::filled(2, 2, 5.0)];
        let mut opt = Adam::new(0.05, &p);
        for _ in 0..2000 {
            let g = p[0].scale(2.0);
            opt.step(&mut p, &[Some(g)]);
        }
        assert!(p[0].abs_sum() < 1e-2);
    }

    #[test]
    fn missing_gradient_freezes_parameter() {
        let mut p = vec![DenseMatrix::filled(1, 1, 1.0), DenseMatrix::filled(1, 1, 1.0)];
        let mut opt = Adam::new(0.1, &p);
        opt.step(&mut p, &[None, Some(DenseMatrix::scalar(1.0))]);
        assert_eq!(p[0].item(), 1.0);
        assert!(p[1].item() < 1.0);
    }
}
