//! Named parameter tensors shared by the NUC and SR networks.

use indexmap::IndexMap;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Real;

/// Name prefix of entries that configure a network rather than train with it.
pub const META_PREFIX: &str = "meta.";

pub fn is_meta(name: &str) -> bool {
    name.starts_with(META_PREFIX)
}

/// One named parameter: a shape and its row-major values.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor<R = f32> {
    pub dims: Vec<usize>,
    pub values: Vec<R>,
}

impl<R: Real> ParamTensor<R> {
    pub fn new(dims: Vec<usize>, values: Vec<R>) -> Result<Self> {
        if dims.iter().product::<usize>() != values.len() {
            return Err(Error::Format(format!("dims {dims:?} do not match {} values", values.len())));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self { dims, values: vec![R::zero(); n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Ordered collection of named parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightStore<R = f32> {
    entries: IndexMap<String, ParamTensor<R>>,
}

impl<R: Real> WeightStore<R> {
    pub fn new() -> Self {
        Self { entries: IndexMap::new() }
    }

    /// Add or replace a parameter.
    pub fn insert(&mut self, name: impl Into<String>, tensor: ParamTensor<R>) {
        self.entries.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Option<&ParamTensor<R>> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ParamTensor<R>> {
        self.entries.get_mut(name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.get_index_of(name)
    }

    pub fn by_index(&self, i: usize) -> &ParamTensor<R> {
        &self.entries[i]
    }

    pub fn by_index_mut(&mut self, i: usize) -> &mut ParamTensor<R> {
        &mut self.entries[i]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamTensor<R>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut ParamTensor<R>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn num_values(&self) -> usize {
        self.entries.values().map(|t| t.len()).sum()
    }

    pub fn cast<S: Real>(&self) -> WeightStore<S> {
        WeightStore {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| {
                    (
                        k.clone(),
                        ParamTensor { dims: v.dims.clone(), values: v.values.iter().map(|x| S::of(x.f64())).collect() },
                    )
                })
                .collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.entries.values().all(|t| t.values.iter().all(|v| v.is_finite()))
    }

    /// Set every value to zero.
    pub fn zeroed(&self) -> Self {
        let mut out = self.clone();
        for t in out.entries.values_mut() {
            t.values.iter_mut().for_each(|v| *v = R::zero());
        }
        out
    }

    pub fn dims(&self, name: &str) -> Result<&[usize]> {
        Ok(&self.get(name).ok_or_else(|| Error::Load(format!("missing parameter `{name}`")))?.dims)
    }

    /// Number of consecutive layers `<prefix>.<i><suffix>.weight` from `i = 0`.
    pub fn count_layers(&self, prefix: &str, suffix: &str) -> usize {
        (0..).take_while(|i| self.get(&format!("{prefix}.{i}{suffix}.weight")).is_some()).count()
    }

    /// Store a non-trainable scalar under `meta.<key>`.
    pub fn set_meta(&mut self, key: &str, value: f64) {
        self.insert(format!("{META_PREFIX}{key}"), ParamTensor { dims: vec![1], values: vec![R::of(value)] });
    }

    pub fn meta(&self, key: &str) -> Result<f64> {
        Ok(self.expect(&format!("{META_PREFIX}{key}"), &[1])?.values[0].f64())
    }

    /// Require a parameter of exactly this shape.
    pub fn expect(&self, name: &str, dims: &[usize]) -> Result<&ParamTensor<R>> {
        let t = self.get(name).ok_or_else(|| Error::Load(format!("missing parameter `{name}`")))?;
        if t.dims != dims {
            return Err(Error::Load(format!("parameter `{name}` has dims {:?}, expected {dims:?}", t.dims)));
        }
        Ok(t)
    }
}

/// Shape of one convolution layer, used for init and load checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub k: usize,
}

impl ConvSpec {
    pub fn new(name: impl Into<String>, in_channels: usize, out_channels: usize, k: usize) -> Self {
        Self { name: name.into(), in_channels, out_channels, k }
    }

    pub fn weight_name(&self) -> String {
        format!("{}.weight", self.name)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.bias", self.name)
    }

    pub fn weight_dims(&self) -> Vec<usize> {
        vec![self.out_channels, self.in_channels, self.k, self.k]
    }

    /// Kaiming-uniform fan-in weights, zero bias.
    pub fn init(&self, store: &mut WeightStore, rng: &mut impl Rng) {
        let fan_in = (self.in_channels * self.k * self.k) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let dims = self.weight_dims();
        let n = dims.iter().product();
        let values = (0..n).map(|_| rng.random_range(-bound..bound) as f32).collect();
        store.insert(self.weight_name(), ParamTensor { dims, values });
        store.insert(self.bias_name(), ParamTensor::zeros(vec![self.out_channels]));
    }

    pub fn zeros(&self, store: &mut WeightStore) {
        store.insert(self.weight_name(), ParamTensor::zeros(self.weight_dims()));
        store.insert(self.bias_name(), ParamTensor::zeros(vec![self.out_channels]));
    }

    pub fn check<R: Real>(&self, store: &WeightStore<R>) -> Result<()> {
        store.expect(&self.weight_name(), &self.weight_dims())?;
        store.expect(&self.bias_name(), &[self.out_channels])?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn init_and_check() {
        let spec = ConvSpec::new("a", 2, 3, 3);
        let mut store = WeightStore::new();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        spec.init(&mut store, &mut rng);
        spec.check(&store).unwrap();
        let bound = (6.0f64 / 18.0).sqrt() as f32;
        assert!(store.get("a.weight").unwrap().values.iter().all(|v| v.abs() <= bound));
        assert!(ConvSpec::new("a", 3, 3, 3).check(&store).is_err());
        assert!(ConvSpec::new("b", 2, 3, 3).check(&store).is_err());
        assert_eq!(store.num_values(), 2 * 3 * 9 + 3);
    }
}
