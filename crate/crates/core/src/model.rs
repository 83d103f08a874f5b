//! An architecture graph bound to a validated weight store.

use std::sync::Arc;

use crate::arch::Architecture;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::tensor::Tensor;
use crate::weights::{WeightFile, WeightStore};

/// Immutable and cheap to clone; any number of threads may run inference on one model.
#[derive(Clone, Debug)]
pub struct ModelGraph {
    arch: Architecture,
    graph: Arc<Graph>,
    weights: WeightStore,
}

impl ModelGraph {
    /// Builds the graph for `arch` at the standard input size and binds `weights`.
    pub fn new(arch: Architecture, weights: WeightStore) -> Result<Self> {
        Self::bind(arch, Arc::new(arch.build_graph()?), weights)
    }

    /// Binds `weights` to an existing graph. Every declared tensor must be
    /// present with its exact shape, and nothing else may be in the store.
    pub fn bind(arch: Architecture, graph: Arc<Graph>, weights: WeightStore) -> Result<Self> {
        weights.validate(&graph)?;
        Ok(Self {
            arch,
            graph,
            weights: weights.freeze(),
        })
    }

    /// Seeded random initialisation at the standard input size.
    pub fn random(arch: Architecture, seed: u64) -> Result<Self> {
        Self::random_at(arch, seed, crate::arch::INPUT_SIZE)
    }

    pub fn random_at(arch: Architecture, seed: u64, input_size: usize) -> Result<Self> {
        let graph = arch.build_graph_at(input_size)?;
        let weights = WeightStore::random_init(&graph, seed);
        Self::bind(arch, Arc::new(graph), weights)
    }

    /// Binds a loaded weight file, checking that its architecture matches `arch`
    /// (by configuration, so aliases such as `nasnet-v03` and `nasnet-a-onfire` agree).
    pub fn from_file(arch: Architecture, file: WeightFile) -> Result<Self> {
        let stored = Architecture::parse(&file.arch)?;
        if stored != arch {
            return Err(Error::Config(format!(
                "weight file holds `{}`, expected `{arch}`",
                file.arch
            )));
        }
        Self::new(arch, file.store)
    }

    /// Same graph, different weights.
    pub fn with_weights(&self, weights: WeightStore) -> Result<Self> {
        Self::bind(self.arch, self.graph.clone(), weights)
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn shared_graph(&self) -> Arc<Graph> {
        self.graph.clone()
    }

    pub fn weights(&self) -> &WeightStore {
        &self.weights
    }

    pub fn input_size(&self) -> usize {
        self.graph.input_shapes()[0][1]
    }

    pub fn param_count(&self) -> usize {
        self.graph.param_count()
    }

    fn check_input(&self, batch: &Tensor) -> Result<()> {
        let [c, h, w] = self.graph.input_shapes()[0];
        let [n, bc, bh, bw] = batch.dims();
        if (bc, bh, bw) != (c, h, w) || n == 0 {
            return Err(Error::shape(
                "forward",
                "input",
                format!("expected N×{c}×{h}×{w} with N ≥ 1, got {n}×{bc}×{bh}×{bw}"),
            ));
        }
        Ok(())
    }

    fn output(&self, name: &str) -> NodeId {
        self.graph
            .output(name)
            .expect("architecture graphs declare logits and features")
    }

    /// One logit per batch item.
    pub fn forward(&self, batch: &Tensor) -> Result<Vec<f32>> {
        self.check_input(batch)?;
        let out = self.graph.execute(&self.weights, &[batch], &[self.output("logits")])?;
        Ok(out.into_iter().next().unwrap().into_data())
    }

    /// Pooled penultimate activations, `N × F × 1 × 1`.
    pub fn forward_features(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_input(batch)?;
        let out = self
            .graph
            .execute(&self.weights, &[batch], &[self.output("features")])?;
        Ok(out.into_iter().next().unwrap())
    }

    /// Values of arbitrary nodes for one batch.
    pub fn activations(&self, batch: &Tensor, nodes: &[NodeId]) -> Result<Vec<Tensor>> {
        self.check_input(batch)?;
        self.graph.execute(&self.weights, &[batch], nodes)
    }

    /// Head weight (`1 × F`) and bias of the single-logit classifier.
    pub fn head(&self) -> Result<(Vec<f32>, f32)> {
        let (w, b) = head_names();
        Ok((self.weights.get(w)?.data().to_vec(), self.weights.get(b)?.data()[0]))
    }
}

/// Tensor names of the classifier weight and bias, shared by both families.
pub fn head_names() -> (&'static str, &'static str) {
    ("head.fc.weight", "head.fc.bias")
}
