//! Named parameter tensors and their on-disk format.

mod ofw;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, ParamDecl, ParamRole};
use crate::tensor::Tensor;

pub use ofw::{decode, encode, load_weights, save_weights, WeightFile, FORMAT_VERSION, MAGIC};

/// Map from hierarchical name to tensor.
///
/// Tensors are reference counted so that derived stores (pruned, fine-tuned)
/// share every tensor they do not replace. Once frozen, [`insert`](Self::insert)
/// is refused; [`with_replaced`](Self::with_replaced) still produces new stores.
#[derive(Clone, Debug, Default)]
pub struct WeightStore {
    tensors: BTreeMap<String, Arc<Tensor>>,
    frozen: bool,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a store holding one tensor per declaration of `graph`.
    pub fn for_graph(graph: &Graph, mut make: impl FnMut(&ParamDecl) -> Tensor) -> Self {
        let tensors = graph
            .params()
            .iter()
            .map(|d| (d.name.clone(), Arc::new(make(d))))
            .collect();
        Self { tensors, frozen: false }
    }

    /// Seeded initialisation: convolution and linear tensors draw from
    /// `uniform(-s, s)` with `s = sqrt(1 / fan_in)`; batch norm starts as identity.
    pub fn random_init(graph: &Graph, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::for_graph(graph, |d| match d.role {
            ParamRole::ConvWeight | ParamRole::LinearWeight | ParamRole::LinearBias => {
                let s = (1.0 / d.fan_in.max(1) as f64).sqrt() as f32;
                Tensor::from_fn(d.dims, |_, _, _, _| rng.gen_range(-s..s))
            }
            ParamRole::BnGamma | ParamRole::BnRunningVar => Tensor::full(d.dims, 1.0),
            ParamRole::BnBeta | ParamRole::BnRunningMean => Tensor::zeros(d.dims),
        })
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        if self.frozen {
            return Err(Error::Frozen);
        }
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(Error::DuplicateWeight(name));
        }
        self.tensors.insert(name, Arc::new(tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .map(|t| t.as_ref())
            .ok_or_else(|| Error::MissingWeight(name.to_string()))
    }

    pub fn get_shared(&self, name: &str) -> Option<&Arc<Tensor>> {
        self.tensors.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v.as_ref()))
    }

    pub fn freeze(mut self) -> Self {
        self.frozen = true;
        self
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// A new store in which the listed tensors are replaced (or added); all
    /// others are shared with `self`. The frozen flag carries over.
    pub fn with_replaced(&self, updates: impl IntoIterator<Item = (String, Tensor)>) -> Self {
        let mut tensors = self.tensors.clone();
        for (name, t) in updates {
            tensors.insert(name, Arc::new(t));
        }
        Self {
            tensors,
            frozen: self.frozen,
        }
    }

    /// True when both stores hold the very same allocation under `name`.
    pub fn shares(&self, other: &WeightStore, name: &str) -> bool {
        match (self.tensors.get(name), other.tensors.get(name)) {
            (Some(a), Some(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }

    /// Checks that the store binds exactly the graph's declarations with matching shapes.
    pub fn validate(&self, graph: &Graph) -> Result<()> {
        graph.audit_param_names()?;
        let mut declared = BTreeSet::new();
        for d in graph.params() {
            let t = self.get(&d.name)?;
            if t.dims() != d.dims {
                return Err(Error::WeightShape {
                    name: d.name,
                    expected: d.dims,
                    found: t.dims(),
                });
            }
            if !t.is_finite() {
                return Err(Error::invalid(
                    "weights",
                    format!("`{}` holds non-finite values", d.name),
                ));
            }
            declared.insert(d.name);
        }
        if let Some(extra) = self.tensors.keys().find(|k| !declared.contains(*k)) {
            return Err(Error::UnreferencedWeight(extra.clone()));
        }
        Ok(())
    }
}

impl PartialEq for WeightStore {
    /// Equal names and bit-identical tensors; the frozen flag is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|((ka, a), (kb, b))| {
                ka == kb
                    && a.dims() == b.dims()
                    && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}
