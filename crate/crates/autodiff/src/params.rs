use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A named tensor with an accumulated gradient and a trainable flag.
///
/// Frozen parameters (`trainable == false`) still receive gradients during
/// the backward pass — they participate in the chain rule for upstream nodes —
/// but optimizers must leave their values untouched.
#[derive(Clone, Debug)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub trainable: bool,
}

/// Ordered collection of parameters shared across tapes.
///
/// Registration order is the canonical parameter order: serialization and
/// optimizer state both index by it.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>, trainable: bool) -> ParamId {
        let grad = Tensor::zeros(value.shape());
        self.params.push(Parameter { name: name.into(), value, grad, trainable });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn param(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].grad
    }

    pub(crate) fn grad_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].grad
    }

    /// Reset every accumulated gradient to zero.
    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            for g in p.grad.data_mut() {
                *g = T::zero();
            }
        }
    }

    /// Multiply every accumulated gradient by `factor` (e.g. 1/batch to turn
    /// per-sample sums into a batch mean).
    pub fn scale_grads(&mut self, factor: T) {
        for p in &mut self.params {
            for g in p.grad.data_mut() {
                *g *= factor;
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Total number of scalar elements across all parameters.
    pub fn total_elements(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Copy flat values into the store in registration order.
    ///
    /// The length must match [`ParamStore::total_elements`]; used when loading
    /// serialized weights.
    pub fn load_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.total_elements() {
            return Err(Error::ShapeMismatch(format!(
                "flat parameter buffer holds {} values but the store expects {}",
                flat.len(),
                self.total_elements()
            )));
        }
        let mut offset = 0;
        for p in &mut self.params {
            let n = p.value.len();
            p.value.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Flatten all parameter values in registration order.
    pub fn to_flat(&self) -> Vec<T> {
        let mut flat = Vec::with_capacity(self.total_elements());
        for p in &self.params {
            flat.extend_from_slice(p.value.data());
        }
        flat
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip_preserves_registration_order() {
        let mut store = ParamStore::<f32>::new();
        store.add("a", Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap(), true);
        store.add("b", Tensor::from_vec(&[3], vec![3.0, 4.0, 5.0]).unwrap(), false);
        let flat = store.to_flat();
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0, 5.0]);

        let mut other = ParamStore::<f32>::new();
        other.add("a", Tensor::zeros(&[2]), true);
        other.add("b", Tensor::zeros(&[3]), false);
        other.load_flat(&flat).unwrap();
        assert_eq!(other.to_flat(), flat);
        assert!(other.load_flat(&flat[..4]).is_err());
    }

    #[test]
    fn zero_grads_clears_accumulation() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Tensor::zeros(&[2]), true);
        store.grad_mut(id).data_mut()[0] = 7.0;
        store.zero_grads();
        assert_eq!(store.grad(id).data(), &[0.0, 0.0]);
    }

    #[test]
    fn scale_grads_applies_factor() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Tensor::zeros(&[2]), true);
        store.grad_mut(id).data_mut().copy_from_slice(&[4.0, -6.0]);
        store.scale_grads(0.5);
        assert_eq!(store.grad(id).data(), &[2.0, -3.0]);
    }
}
