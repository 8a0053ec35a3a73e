use std::collections::BTreeMap;

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub(crate) m: Vec<T>,
    pub(crate) v: Vec<T>,
}

/// Named trainable tensors with their gradients and Adam moments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T = f32> {
    params: Vec<Param<T>>,
    index: BTreeMap<String, usize>,
    pub step: u64,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new(), index: BTreeMap::new(), step: 0 }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::config(format!("duplicate parameter name {name}")));
        }
        let n = value.len();
        let grad = Tensor::zeros(&value.shape);
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Param { name, value, grad, m: vec![T::zero(); n], v: vec![T::zero(); n] });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].value
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].grad
    }

    pub fn grad(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].grad
    }

    /// Value and gradient of one parameter at once.
    pub fn split(&mut self, id: ParamId) -> (&Tensor<T>, &mut Tensor<T>) {
        let p = &mut self.params[id.0];
        (&p.value, &mut p.grad)
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Parameters in name order.
    pub fn iter_sorted(&self) -> impl Iterator<Item = &Param<T>> {
        self.index.values().map(move |&i| &self.params[i])
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    /// Overwrites values by name; every stored parameter must be present
    /// with the same shape.
    pub fn load_values(&mut self, values: &[(String, Tensor<T>)]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::config(format!("checkpoint has {} tensors, model has {}", values.len(), self.params.len())));
        }
        for (name, t) in values {
            let id = self.id(name).ok_or_else(|| Error::config(format!("unknown parameter {name} in checkpoint")))?;
            let p = &mut self.params[id.0];
            if p.value.shape != t.shape {
                return Err(Error::shape(name.clone(), format!("checkpoint {:?} vs model {:?}", t.shape, p.value.shape)));
            }
            p.value.data.clone_from(&t.data);
        }
        Ok(())
    }

    /// Same names and shapes, values cast to another precision.
    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    value: p.value.cast(),
                    grad: p.grad.cast(),
                    m: vec![U::zero(); p.m.len()],
                    v: vec![U::zero(); p.v.len()],
                })
                .collect(),
            index: self.index.clone(),
            step: self.step,
        }
    }
}
