//! Named parameter store with paired gradient buffers.

use std::collections::BTreeMap;

use crate::nn::Tensor;
use crate::{Error, Result};

/// A flat map of named tensors, each with a gradient buffer of identical
/// shape. Iteration order is the name order, so flattened views are stable.
#[derive(Debug, Clone, Default)]
pub struct ModelParams {
    values: BTreeMap<String, Tensor>,
    grads: BTreeMap<String, Tensor>,
}

impl ModelParams {
    pub fn new() -> ModelParams {
        ModelParams::default()
    }

    /// Register a parameter; its gradient buffer starts zeroed.
    pub fn insert(&mut self, name: &str, value: Tensor) {
        let grad = Tensor::zeros(value.shape());
        self.values.insert(name.to_string(), value);
        self.grads.insert(name.to_string(), grad);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn value(&self, name: &str) -> &Tensor {
        self.values
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
    }

    pub fn value_mut(&mut self, name: &str) -> &mut Tensor {
        self.values
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
    }

    pub fn grad(&self, name: &str) -> &Tensor {
        self.grads
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
    }

    pub fn grad_mut(&mut self, name: &str) -> &mut Tensor {
        self.grads
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
    }

    /// Parameter value and its gradient buffer, borrowed together.
    pub fn value_and_grad_mut(&mut self, name: &str) -> (&Tensor, &mut Tensor) {
        let value = self
            .values
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"));
        let grad = self
            .grads
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"));
        (value, grad)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_grads(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.grads.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Pairs of (value, grad) in name order, both mutable; used by optimizers.
    pub fn iter_pairs_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor, &mut Tensor)> {
        self.values
            .iter_mut()
            .zip(self.grads.values_mut())
            .map(|((name, v), g)| (name.as_str(), v, g))
    }

    pub fn zero_grads(&mut self) {
        for g in self.grads.values_mut() {
            g.fill(0.0);
        }
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.values.values().map(|t| t.len()).sum()
    }

    /// First parameter whose value or gradient holds a NaN/Inf.
    pub fn first_non_finite(&self) -> Option<String> {
        for (name, t) in &self.values {
            if !t.all_finite() {
                return Some(name.clone());
            }
        }
        for (name, g) in &self.grads {
            if !g.all_finite() {
                return Some(format!("grad({name})"));
            }
        }
        None
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.first_non_finite() {
            Some(name) => Err(Error::NonFinite(name)),
            None => Ok(()),
        }
    }

    /// All values concatenated in name order.
    pub fn flatten_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.scalar_count());
        for t in self.values.values() {
            out.extend_from_slice(t.data());
        }
        out
    }

    /// All gradients concatenated in name order.
    pub fn flatten_grads(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.scalar_count());
        for t in self.grads.values() {
            out.extend_from_slice(t.data());
        }
        out
    }

    /// Overwrite all values from a flat slice in name order.
    pub fn set_flat_values(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.scalar_count() {
            return Err(Error::DimensionMismatch {
                context: "set_flat_values",
                expected: self.scalar_count(),
                actual: flat.len(),
            });
        }
        let mut offset = 0;
        for t in self.values.values_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grads_track_shapes_and_flatten_round_trips() {
        let mut p = ModelParams::new();
        p.insert("b", Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap());
        p.insert("a", Tensor::from_vec(&[1, 3], vec![3.0, 4.0, 5.0]).unwrap());
        assert_eq!(p.grad("a").shape(), &[1, 3]);
        assert_eq!(p.scalar_count(), 5);

        // name order: "a" before "b"
        let flat = p.flatten_values();
        assert_eq!(flat, vec![3.0, 4.0, 5.0, 1.0, 2.0]);
        let mut q = p.clone();
        q.set_flat_values(&[0.0, 0.0, 0.0, 9.0, 9.0]).unwrap();
        assert_eq!(q.value("b").data(), &[9.0, 9.0]);
    }

    #[test]
    fn non_finite_detection_names_the_parameter() {
        let mut p = ModelParams::new();
        p.insert("w", Tensor::from_vec(&[1], vec![f64::NAN]).unwrap());
        assert_eq!(p.first_non_finite().as_deref(), Some("w"));
    }
}
