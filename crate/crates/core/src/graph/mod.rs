//! Executable architecture descriptions.
//!
//! A [`Graph`] is a topologically ordered list of [`Node`]s. Nodes that carry
//! parameters name them hierarchically (`stage2.0.branch2.pw1.weight`); the
//! tensors themselves live in a [`WeightStore`](crate::weights::WeightStore)
//! that is bound at execution time.

mod builder;
mod exec;

use std::collections::BTreeMap;
use std::ops::Range;

pub use builder::GraphBuilder;

use crate::error::{Error, Result};
use crate::ops::PoolParams;
use crate::tensor::ConvParams;

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvSpec {
    pub weight: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub params: ConvParams,
}

impl ConvSpec {
    pub fn weight_dims(&self) -> [usize; 4] {
        [
            self.out_channels,
            self.in_channels / self.params.groups,
            self.params.kernel_h,
            self.params.kernel_w,
        ]
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels / self.params.groups * self.params.kernel_h * self.params.kernel_w
    }

    pub fn is_depthwise(&self) -> bool {
        self.params.groups > 1 && self.params.groups == self.in_channels && self.in_channels == self.out_channels
    }

    pub fn is_pointwise(&self) -> bool {
        self.params.groups == 1 && self.params.kernel_h == 1 && self.params.kernel_w == 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BnSpec {
    pub prefix: String,
    pub channels: usize,
    pub eps: f32,
}

impl BnSpec {
    pub fn gamma(&self) -> String {
        format!("{}.gamma", self.prefix)
    }
    pub fn beta(&self) -> String {
        format!("{}.beta", self.prefix)
    }
    pub fn running_mean(&self) -> String {
        format!("{}.running_mean", self.prefix)
    }
    pub fn running_var(&self) -> String {
        format!("{}.running_var", self.prefix)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSpec {
    pub weight: String,
    pub bias: String,
    pub in_features: usize,
    pub out_features: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    /// The `index`-th graph input.
    Input {
        index: usize,
    },
    Conv(ConvSpec),
    BatchNorm(BnSpec),
    Relu,
    MaxPool(PoolParams),
    AvgPool(PoolParams),
    GlobalAvgPool,
    Add,
    Concat,
    Slice {
        start: usize,
        len: usize,
    },
    Shuffle {
        groups: usize,
    },
    ShiftCrop,
    /// Applies to an `N × C × 1 × 1` input and yields `N × out × 1 × 1`.
    Linear(LinearSpec),
}

#[derive(Clone, Debug)]
pub struct Node {
    pub name: String,
    pub op: Op,
    pub inputs: Vec<NodeId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellKind {
    Stem,
    ShuffleReduction,
    ShuffleNormal,
    NasStem,
    NasNormal,
    NasReduction,
    FinalConv,
    Head,
}

#[derive(Clone, Debug)]
pub struct CellSpan {
    pub name: String,
    pub kind: CellKind,
    pub nodes: Range<NodeId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    ConvWeight,
    BnGamma,
    BnBeta,
    BnRunningMean,
    BnRunningVar,
    LinearWeight,
    LinearBias,
}

impl ParamRole {
    /// Running statistics are state, not learnable parameters.
    pub fn is_learnable(self) -> bool {
        !matches!(self, ParamRole::BnRunningMean | ParamRole::BnRunningVar)
    }
}

#[derive(Clone, Debug)]
pub struct ParamDecl {
    pub name: String,
    pub dims: [usize; 4],
    pub role: ParamRole,
    pub fan_in: usize,
    pub node: NodeId,
}

impl ParamDecl {
    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Branch counts of depthwise-separable blocks keyed by kernel size.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SeparableCensus {
    pub branches: BTreeMap<usize, usize>,
    /// Depthwise convolutions not part of a recognised two-stage separable branch.
    pub unmatched_depthwise: usize,
}

impl SeparableCensus {
    pub fn count(&self, kernel: usize) -> usize {
        self.branches.get(&kernel).copied().unwrap_or(0)
    }
}

#[derive(Clone, Debug)]
pub struct Graph {
    name: String,
    nodes: Vec<Node>,
    /// `(C, H, W)` of every node at the declared input resolution.
    shapes: Vec<[usize; 3]>,
    inputs: Vec<[usize; 3]>,
    outputs: BTreeMap<String, NodeId>,
    cells: Vec<CellSpan>,
}

impl Graph {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn cells(&self) -> &[CellSpan] {
        &self.cells
    }

    pub fn cells_of(&self, kind: CellKind) -> impl Iterator<Item = &CellSpan> {
        self.cells.iter().filter(move |c| c.kind == kind)
    }

    /// Declared `(C, H, W)` of each graph input.
    pub fn input_shapes(&self) -> &[[usize; 3]] {
        &self.inputs
    }

    /// `(C, H, W)` of a node at the declared input resolution.
    pub fn shape(&self, id: NodeId) -> [usize; 3] {
        self.shapes[id]
    }

    /// A named output node (`"logits"`, `"features"`, ...).
    pub fn output(&self, name: &str) -> Option<NodeId> {
        self.outputs.get(name).copied()
    }

    pub fn outputs(&self) -> &BTreeMap<String, NodeId> {
        &self.outputs
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Every tensor the graph reads, in node order.
    pub fn params(&self) -> Vec<ParamDecl> {
        let mut out = Vec::new();
        for (id, node) in self.nodes.iter().enumerate() {
            match &node.op {
                Op::Conv(c) => out.push(ParamDecl {
                    name: c.weight.clone(),
                    dims: c.weight_dims(),
                    role: ParamRole::ConvWeight,
                    fan_in: c.fan_in(),
                    node: id,
                }),
                Op::BatchNorm(bn) => {
                    let v = [bn.channels, 1, 1, 1];
                    for (name, role) in [
                        (bn.gamma(), ParamRole::BnGamma),
                        (bn.beta(), ParamRole::BnBeta),
                        (bn.running_mean(), ParamRole::BnRunningMean),
                        (bn.running_var(), ParamRole::BnRunningVar),
                    ] {
                        out.push(ParamDecl {
                            name,
                            dims: v,
                            role,
                            fan_in: 0,
                            node: id,
                        });
                    }
                }
                Op::Linear(l) => {
                    out.push(ParamDecl {
                        name: l.weight.clone(),
                        dims: [l.out_features, l.in_features, 1, 1],
                        role: ParamRole::LinearWeight,
                        fan_in: l.in_features,
                        node: id,
                    });
                    out.push(ParamDecl {
                        name: l.bias.clone(),
                        dims: [l.out_features, 1, 1, 1],
                        role: ParamRole::LinearBias,
                        fan_in: l.in_features,
                        node: id,
                    });
                }
                _ => {}
            }
        }
        out
    }

    /// Learnable parameters: convolution weights, batch-norm gamma/beta, linear weight and bias.
    pub fn param_count(&self) -> usize {
        self.params()
            .iter()
            .filter(|p| p.role.is_learnable())
            .map(ParamDecl::numel)
            .sum()
    }

    /// Learnable parameter count per parameter-carrying node, in node order.
    pub fn param_breakdown(&self) -> Vec<(String, usize)> {
        let mut rows: Vec<(String, usize)> = Vec::new();
        let mut last = None;
        for p in self.params().into_iter().filter(|p| p.role.is_learnable()) {
            if last == Some(p.node) {
                rows.last_mut().unwrap().1 += p.numel();
            } else {
                rows.push((self.nodes[p.node].name.clone(), p.numel()));
                last = Some(p.node);
            }
        }
        rows
    }

    /// Learnable parameters of the nodes inside `cell`.
    pub fn cell_param_count(&self, cell: &CellSpan) -> usize {
        self.params()
            .iter()
            .filter(|p| p.role.is_learnable() && cell.nodes.contains(&p.node))
            .map(ParamDecl::numel)
            .sum()
    }

    /// Checks that no tensor name is read by more than one node.
    pub fn audit_param_names(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for p in self.params() {
            if !seen.insert(p.name.clone()) {
                return Err(Error::DuplicateWeight(p.name));
            }
        }
        Ok(())
    }

    pub fn consumers(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (id, n) in self.nodes.iter().enumerate() {
            for &i in &n.inputs {
                out[i].push(id);
            }
        }
        out
    }

    /// Counts depthwise-separable branches inside a cell by inspecting node wiring.
    ///
    /// A branch is the chain `relu → dw(k) → pw → bn → relu → dw(k) → pw → bn`;
    /// it is counted once, under its kernel size `k`.
    pub fn separable_census(&self, cell: &CellSpan) -> SeparableCensus {
        let consumers = self.consumers();
        let conv = |id: NodeId| match &self.nodes[id].op {
            Op::Conv(c) => Some(c),
            _ => None,
        };
        let sole = |id: NodeId| match consumers[id].as_slice() {
            [only] => Some(*only),
            _ => None,
        };
        let is = |id: NodeId, f: fn(&Op) -> bool| f(&self.nodes[id].op);
        // dw -> pw -> bn, returning the bn node.
        let stage = |dw: NodeId| -> Option<NodeId> {
            let pw = sole(dw)?;
            conv(pw).filter(|c| c.is_pointwise())?;
            let bn = sole(pw)?;
            is(bn, |o| matches!(o, Op::BatchNorm(_))).then_some(bn)
        };

        let mut census = SeparableCensus::default();
        let mut used = std::collections::BTreeSet::new();
        for id in cell.nodes.clone() {
            let Some(c) = conv(id) else { continue };
            if !c.is_depthwise() || used.contains(&id) {
                continue;
            }
            let k = c.params.kernel_h;
            let chain = (|| {
                let relu_in = *self.nodes[id].inputs.first()?;
                is(relu_in, |o| matches!(o, Op::Relu)).then_some(())?;
                let bn1 = stage(id)?;
                let relu_mid = sole(bn1)?;
                is(relu_mid, |o| matches!(o, Op::Relu)).then_some(())?;
                let dw2 = sole(relu_mid)?;
                conv(dw2).filter(|c| c.is_depthwise() && c.params.kernel_h == k)?;
                stage(dw2)?;
                Some(dw2)
            })();
            match chain {
                Some(dw2) => {
                    used.insert(id);
                    used.insert(dw2);
                    *census.branches.entry(k).or_default() += 1;
                }
                None => census.unmatched_depthwise += 1,
            }
        }
        census
    }
}
