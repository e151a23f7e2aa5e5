use super::{Gradients, NnError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named parameter tensors in declaration order, with accumulated gradients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    grads: Vec<Option<Tensor>>,
    trainable: Vec<bool>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        self.grads.push(None);
        self.trainable.push(true);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.trainable[id.0]
    }

    /// Frozen parameters receive no gradients and are skipped by optimizers.
    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.trainable[id.0] = trainable;
    }

    pub fn accumulate(&mut self, grads: &Gradients) {
        for (id, g) in grads.params() {
            if !self.trainable[id.0] {
                continue;
            }
            match &mut self.grads[id.0] {
                Some(acc) => acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a += b),
                slot => *slot = Some(g.clone()),
            }
        }
    }

    /// Gives every trainable parameter without a gradient an explicit zero one.
    pub fn fill_missing_grads(&mut self) {
        for i in 0..self.values.len() {
            if self.trainable[i] && self.grads[i].is_none() {
                self.grads[i] = Some(Tensor::zeros(self.values[i].shape()));
            }
        }
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    pub(crate) fn grads_mut(&mut self) -> &mut [Option<Tensor>] {
        &mut self.grads
    }

    /// Copies values of the parameters in `ids` from `src`, matched by name.
    pub fn copy_values_from(&mut self, src: &ParamStore, names: &[String]) -> Result<(), NnError> {
        for name in names {
            let (Some(d), Some(s)) = (self.find(name), src.find(name)) else {
                return Err(NnError::Checkpoint(format!("parameter {name} missing")));
            };
            if self.values[d.0].shape() != src.values[s.0].shape() {
                return Err(super::shape_err("copy", self.values[d.0].shape(), src.values[s.0].shape()));
            }
            self.values[d.0] = src.values[s.0].clone();
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.values.iter().enumerate().map(|(i, v)| (ParamId(i), self.names[i].as_str(), v))
    }
}
