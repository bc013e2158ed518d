use rand::Rng;

use crate::numerics::{Bound, DenseMatrix, Graph, ParamId, ParamStore, Var};

/// Glorot-scaled normal init.
pub fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> DenseMatrix {
    let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
    DenseMatrix::random_normal(fan_in, fan_out, std, rng)
}

/// Row-vector affine map `x W + b`.
#[derive(Debug, Clone, Copy)]
pub struct Affine {
    pub w: ParamId,
    pub b: ParamId,
}

impl Affine {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        Self {
            w: store.add(format!("{name}.w"), glorot(fan_in, fan_out, rng)),
            b: store.add(format!("{name}.b"), DenseMatrix::zeros(1, fan_out)),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        let xw = g.matmul(x, p.var(self.w));
        g.add_row(xw, p.var(self.b))
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.w, self.b]
    }
}

/// Two-layer perceptron: affine, ReLU, affine.
#[derive(Debug, Clone, Copy)]
pub struct Mlp2 {
    pub first: Affine,
    pub second: Affine,
}

impl Mlp2 {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        hidden: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            first: Affine::new(store, &format!("{name}.0"), fan_in, hidden, rng),
            second: Affine::new(store, &format!("{name}.1"), hidden, fan_out, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        let h = self.first.forward(g, p, x);
        let h = g.relu(h);
        self.second.forward(g, p, h)
    }

    pub fn params(&self) -> [ParamId; 4] {
        [self.first.w, self.first.b, self.second.w, self.second.b]
    }
}
