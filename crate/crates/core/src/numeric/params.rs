use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// One named parameter array with its gradient and Adam moment buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    pub adam_m: Tensor,
    pub adam_v: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let zeros = Tensor::zeros(value.shape());
        Param {
            grad: zeros.clone(),
            adam_m: zeros.clone(),
            adam_v: zeros,
            value,
        }
    }
}

/// Named parameters, iterated in name order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    entries: BTreeMap<String, Param>,
    pub(crate) step_count: u64,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        self.entries.insert(name.into(), Param::new(value));
    }

    pub(crate) fn insert_param(&mut self, name: String, param: Param) {
        self.entries.insert(name, param);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Param> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::Lookup(format!("no parameter named {:?}", name)))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Param> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| Error::Lookup(format!("no parameter named {:?}", name)))
    }

    pub fn value(&self, name: &str) -> Result<&Tensor> {
        Ok(&self.get(name)?.value)
    }

    pub fn value_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        Ok(&mut self.get_mut(name)?.value)
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor> {
        Ok(&self.get(name)?.grad)
    }

    pub fn grad_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        Ok(&mut self.get_mut(name)?.grad)
    }

    /// Adds `delta` into the gradient buffer of `name`.
    pub fn accumulate(&mut self, name: &str, delta: &Tensor) -> Result<()> {
        let grad = self.grad_mut(name)?;
        if grad.len() != delta.len() {
            return Err(Error::Dimension {
                op: "accumulate",
                detail: format!("{} into {:?} of size {}", delta.len(), name, grad.len()),
            });
        }
        grad.data_mut()
            .iter_mut()
            .zip(delta.data())
            .for_each(|(g, d)| *g += d);
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        self.entries.values_mut().for_each(|p| p.grad.fill(0.0));
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub(crate) fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Total number of scalar parameters across all entries.
    pub fn total_size(&self) -> usize {
        self.entries.values().map(|p| p.value.len()).sum()
    }
}

/// Glorot-uniform bound `√(6/(fan_in+fan_out))` for a parameter shape.
///
/// Matrices use `rows + cols`. Rank-3 filter banks `[filters, k, k]` use
/// `fan_in = k·k` and `fan_out = filters·k·k`.
pub fn glorot_bound(shape: &[usize]) -> f64 {
    let (fan_in, fan_out) = match shape {
        [n] => (*n, *n),
        [r, c] => (*r, *c),
        [f, rest @ ..] => {
            let receptive: usize = rest.iter().product();
            (receptive, f * receptive)
        }
        [] => (1, 1),
    };
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Creates a store with every entry drawn from a seeded Glorot-uniform
/// distribution. Entries are sampled in the order given.
pub fn init_parameters(shapes: &[(String, Vec<usize>)], seed: u64) -> Result<ParameterStore> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParameterStore::new();
    for (name, shape) in shapes {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Config(format!(
                "parameter {:?} has an empty dimension: {:?}",
                name, shape
            )));
        }
        let bound = glorot_bound(shape);
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        store.insert(name.clone(), Tensor::from_vec(shape, data)?);
    }
    Ok(store)
}
