use std::collections::HashMap;

use super::{Tensor, TensorError};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub trainable: bool,
}

/// Named trainable tensors with gradient accumulators, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor, trainable: bool) -> Result<ParamId, TensorError> {
        if self.index.contains_key(name) {
            return Err(TensorError::DuplicateParam(name.to_string()));
        }
        if !value.is_finite() {
            return Err(TensorError::NonFinite(format!("initial value of {name}")));
        }
        let id = ParamId(self.params.len());
        let grad = Tensor::zeros(value.shape());
        self.params.push(Param { name: name.to_string(), value, grad, trainable });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<ParamId, TensorError> {
        self.index.get(name).copied().ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.index.get(name).map(|id| &self.params[id.0])
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Adds gradients produced by a backward pass; frozen parameters are skipped.
    pub fn accumulate(&mut self, grads: &Gradients) -> Result<(), TensorError> {
        for (id, g) in grads.iter() {
            let p = &mut self.params[id.0];
            if !p.trainable {
                continue;
            }
            if p.grad.shape() != g.shape() {
                return Err(TensorError::Shape(format!(
                    "gradient for {} has shape {:?}, value {:?}",
                    p.name,
                    g.shape(),
                    p.grad.shape()
                )));
            }
            p.grad.add_assign(g);
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Euclidean norm of the concatenation of all trainable gradients.
    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.grad.sum_of_squares())
            .sum::<f64>()
            .sqrt()
    }

    /// Global-norm clipping followed by a plain SGD update. Returns the norm
    /// measured before clipping; gradients are zeroed afterwards.
    pub fn clip_and_step(&mut self, lr: f64, max_norm: f64) -> Result<f64, TensorError> {
        for p in self.params.iter().filter(|p| p.trainable) {
            if !p.grad.is_finite() {
                return Err(TensorError::NonFinite(format!("gradient of {}", p.name)));
            }
        }
        let norm = self.grad_norm();
        let scale = if norm > max_norm { max_norm / norm } else { 1.0 };
        for p in self.params.iter_mut().filter(|p| p.trainable) {
            for (v, g) in p.value.data_mut().iter_mut().zip(p.grad.data_mut().iter_mut()) {
                *g *= scale;
                *v -= lr * *g;
            }
        }
        self.zero_grads();
        Ok(norm)
    }
}

/// Per-parameter gradients from one backward pass.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    grads: Vec<(ParamId, Tensor)>,
}

impl Gradients {
    pub(crate) fn slot(&mut self, id: ParamId, shape: &[usize]) -> &mut Tensor {
        let pos = match self.grads.iter().position(|(i, _)| *i == id) {
            Some(pos) => pos,
            None => {
                self.grads.push((id, Tensor::zeros(shape)));
                self.grads.len() - 1
            }
        };
        &mut self.grads[pos].1
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.iter().find(|(i, _)| *i == id).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads.iter().map(|(i, t)| (*i, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with_grad(grad: Vec<f64>) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.insert("w", Tensor::row_vector(vec![1.0; grad.len()]), true).unwrap();
        s.get_mut(id).grad = Tensor::row_vector(grad);
        (s, id)
    }

    #[test]
    fn small_norm_is_not_clipped() {
        let (mut s, id) = store_with_grad(vec![3.0, 0.0]);
        let norm = s.clip_and_step(0.5, 5.0).unwrap();
        assert_eq!(norm, 3.0);
        assert_eq!(s.value(id).data(), &[1.0 - 1.5, 1.0]);
        assert_eq!(s.get(id).grad.data(), &[0.0, 0.0]);
    }

    #[test]
    fn large_norm_is_clipped_to_threshold() {
        let (mut s, id) = store_with_grad(vec![6.0, 8.0]);
        let norm = s.clip_and_step(1.0, 5.0).unwrap();
        assert_eq!(norm, 10.0);
        // step equals the clipped gradient: [3, 4], norm 5
        let step: Vec<f64> = s.value(id).data().iter().map(|v| 1.0 - v).collect();
        assert_eq!(step, vec![3.0, 4.0]);
        assert!((step.iter().map(|v| v * v).sum::<f64>().sqrt() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn zero_lr_only_zeroes_grads() {
        let (mut s, id) = store_with_grad(vec![1.0, 2.0]);
        s.clip_and_step(0.0, 5.0).unwrap();
        assert_eq!(s.value(id).data(), &[1.0, 1.0]);
        assert_eq!(s.get(id).grad.data(), &[0.0, 0.0]);
    }

    #[test]
    fn non_finite_gradient_aborts_before_update() {
        let (mut s, id) = store_with_grad(vec![f64::NAN, 1.0]);
        assert!(matches!(s.clip_and_step(1.0, 5.0), Err(TensorError::NonFinite(_))));
        assert_eq!(s.value(id).data(), &[1.0, 1.0]);
    }

    #[test]
    fn frozen_params_are_untouched() {
        let mut s = ParamStore::new();
        let id = s.insert("frozen", Tensor::row_vector(vec![1.0]), false).unwrap();
        let mut g = Gradients::default();
        g.slot(id, &[1, 1]).data_mut()[0] = 4.0;
        s.accumulate(&g).unwrap();
        s.clip_and_step(1.0, 5.0).unwrap();
        assert_eq!(s.value(id).data(), &[1.0]);
        assert!(s.insert("frozen", Tensor::scalar(0.0), true).is_err());
    }
}
