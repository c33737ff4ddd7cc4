use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::Tensor;

/// First and second Adam moments for one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub first: Tensor,
    pub second: Tensor,
}

/// Named learnable tensors plus the optimizer state that belongs to them.
///
/// Iteration order is the lexical order of names, which keeps checkpoints and
/// seeded initialization stable.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    entries: BTreeMap<String, Tensor>,
    moments: BTreeMap<String, Moments>,
    seed: u64,
    step: u64,
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        Self {
            entries: BTreeMap::new(),
            moments: BTreeMap::new(),
            seed,
            step: 0,
        }
    }

    pub(crate) fn from_parts(
        entries: BTreeMap<String, Tensor>,
        moments: BTreeMap<String, Moments>,
        seed: u64,
        step: u64,
    ) -> Self {
        Self {
            entries,
            moments,
            seed,
            step,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of optimizer steps taken so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub(crate) fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::Contract(format!("parameter `{name}` registered twice")));
        }
        self.entries.insert(name, value);
        Ok(())
    }

    /// Overwrites an existing parameter; the shape may not change.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let slot = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter `{name}`")))?;
        if slot.shape() != value.shape() {
            return Err(Error::dim(
                name,
                format!("shape {:?} cannot replace {:?}", value.shape(), slot.shape()),
            ));
        }
        *slot = value;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub(crate) fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::Contract(format!("missing parameter `{name}`")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(Tensor::numel).sum()
    }

    pub fn moments(&self, name: &str) -> Option<&Moments> {
        self.moments.get(name)
    }

    pub(crate) fn moments_entry(&mut self, name: &str) -> &mut Moments {
        let shape = self.entries[name].shape().to_vec();
        self.moments.entry(name.to_string()).or_insert_with(|| Moments {
            first: Tensor::zeros(&shape),
            second: Tensor::zeros(&shape),
        })
    }

    /// Drops optimizer state, e.g. when a transferred model starts a new task.
    pub fn reset_optimizer(&mut self) {
        self.moments.clear();
        self.step = 0;
    }
}

/// Deterministic initializer driven by a single seeded stream.
///
/// Parameters must be requested in the same order for the same values to be
/// produced; model builders register them in a fixed order.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in `[-bound, bound]`.
    pub fn uniform(&mut self, shape: &[usize], bound: f64) -> Tensor {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                if bound == 0.0 {
                    0.0
                } else {
                    self.rng.random_range(-bound..=bound)
                }
            })
            .collect();
        Tensor::new(shape.to_vec(), data).expect("shape product matches")
    }

    /// Affine layer `fan_in -> fan_out` with the usual `1/sqrt(fan_in)` bound,
    /// scaled by `gain`.
    pub fn linear(&mut self, fan_in: usize, fan_out: usize, gain: f64) -> (Tensor, Tensor) {
        let bound = gain / (fan_in as f64).sqrt();
        let w = self.uniform(&[fan_in, fan_out], bound);
        let b = self.uniform(&[fan_out], bound);
        (w, b)
    }
}
