//! Named parameter storage shared by the model families.

use std::collections::HashMap;

use super::Tensor;

/// Handle to a parameter registered in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

/// A learned tensor plus its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Option<Tensor>,
    /// Embedding tables opt out of L2 regularization.
    pub l2_exempt: bool,
}

/// Insertion-ordered parameter set. Order is part of the checkpoint format,
/// so registration order must be deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.insert(name.into(), value, false)
    }

    pub fn register_embedding(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.insert(name.into(), value, true)
    }

    fn insert(&mut self, name: String, value: Tensor, l2_exempt: bool) -> ParamId {
        assert!(
            !self.by_name.contains_key(&name),
            "duplicate parameter name {name:?}"
        );
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id.0);
        self.params.push(Parameter {
            name,
            value,
            grad: None,
            l2_exempt,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn lookup(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> Option<&Tensor> {
        self.params[id.0].grad.as_ref()
    }

    pub fn accumulate_grad(&mut self, id: ParamId, contribution: &[f64]) {
        let param = &mut self.params[id.0];
        let grad = param
            .grad
            .get_or_insert_with(|| Tensor::zeros(param.value.shape()));
        for (g, c) in grad.data_mut().iter_mut().zip(contribution) {
            *g += c;
        }
    }

    pub(crate) fn zero_grad(&mut self, id: ParamId) {
        if let Some(grad) = &mut self.params[id.0].grad {
            grad.data_mut().fill(0.0);
        }
    }

    /// Reset every gradient accumulator to zero (keeping it allocated).
    pub fn zero_grads(&mut self) {
        for param in &mut self.params {
            if let Some(grad) = &mut param.grad {
                grad.data_mut().fill(0.0);
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grads_accumulate_across_calls() {
        let mut store = ParamStore::new();
        let id = store.register("w", Tensor::vector(vec![1.0, 2.0]));
        store.accumulate_grad(id, &[0.5, 0.5]);
        store.accumulate_grad(id, &[1.0, -0.5]);
        assert_eq!(store.grad(id).unwrap().data(), &[1.5, 0.0]);
        store.zero_grads();
        assert_eq!(store.grad(id).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    #[should_panic(expected = "duplicate parameter name")]
    fn duplicate_names_rejected() {
        let mut store = ParamStore::new();
        store.register("w", Tensor::scalar(0.0));
        store.register("w", Tensor::scalar(1.0));
    }
}
