use serde::{Deserialize, Serialize};

use super::autodiff::{Gradients, Graph, Var};
use super::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named trainable tensors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<DenseMatrix>,
}

/// Graph handles for every parameter of a store, valid for one graph.
pub struct Bound {
    vars: Vec<Var>,
    trainable: Vec<bool>,
}

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    /// Handles of the parameters that were bound as trainable.
    pub fn trainable_vars(&self) -> Vec<Var> {
        self.vars.iter().zip(&self.trainable).filter(|(_, &t)| t).map(|(&v, _)| v).collect()
    }

    /// Per-parameter gradients in store order; `None` for frozen parameters.
    pub fn collect(&self, grads: &Gradients, store: &ParamStore) -> Vec<Option<DenseMatrix>> {
        self.vars
            .iter()
            .zip(&self.trainable)
            .zip(&store.values)
            .map(|((&v, &t), value)| t.then(|| grads.get_or_zeros(v, value.rows(), value.cols())))
            .collect()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: DenseMatrix) -> ParamId {
        let name = name.into();
        assert!(!self.names.contains(&name), "duplicate parameter name '{name}'");
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &DenseMatrix {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut DenseMatrix {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn values(&self) -> &[DenseMatrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [DenseMatrix] {
        &mut self.values
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(DenseMatrix::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(DenseMatrix::is_finite)
    }

    /// Adds i.i.d. normal noise to every entry, moving biases off zero.
    pub fn jitter<R: rand::Rng + ?Sized>(&mut self, std: f64, rng: &mut R) {
        for v in &mut self.values {
            let noise = DenseMatrix::random_normal(v.rows(), v.cols(), std, rng);
            v.add_assign(&noise);
        }
    }

    /// Puts every parameter on the graph, as a trainable leaf when `trainable`
    /// says so and as a constant otherwise.
    pub fn bind(&self, g: &mut Graph, trainable: impl Fn(ParamId) -> bool) -> Bound {
        let mut vars = Vec::with_capacity(self.values.len());
        let mut flags = Vec::with_capacity(self.values.len());
        for (i, v) in self.values.iter().enumerate() {
            let t = trainable(ParamId(i));
            vars.push(if t { g.param(v.clone()) } else { g.constant(v.clone()) });
            flags.push(t);
        }
        Bound { vars, trainable: flags }
    }

    /// All parameters as graph constants.
    pub fn bind_frozen(&self, g: &mut Graph) -> Bound {
        self.bind(g, |_| false)
    }
}
