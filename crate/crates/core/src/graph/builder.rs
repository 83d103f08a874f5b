use std::collections::BTreeMap;

use super::{BnSpec, CellKind, CellSpan, ConvSpec, Graph, LinearSpec, Node, NodeId, Op};
use crate::ops::PoolParams;
use crate::tensor::ConvParams;

/// Incremental graph construction with scoped names and eager shape tracking.
///
/// Shape violations panic: the builders in this crate validate their
/// configuration first, so a mismatch here is a wiring bug.
pub struct GraphBuilder {
    name: String,
    nodes: Vec<Node>,
    shapes: Vec<[usize; 3]>,
    inputs: Vec<[usize; 3]>,
    outputs: BTreeMap<String, NodeId>,
    cells: Vec<CellSpan>,
    open_cell: Option<(String, CellKind, NodeId)>,
    scope: Vec<String>,
}

impl GraphBuilder {
    pub fn new(name: impl Into<String>, inputs: Vec<[usize; 3]>) -> Self {
        Self {
            name: name.into(),
            nodes: Vec::new(),
            shapes: Vec::new(),
            inputs,
            outputs: BTreeMap::new(),
            cells: Vec::new(),
            open_cell: None,
            scope: Vec::new(),
        }
    }

    pub fn shape(&self, id: NodeId) -> [usize; 3] {
        self.shapes[id]
    }

    pub fn channels(&self, id: NodeId) -> usize {
        self.shapes[id][0]
    }

    fn path(&self, leaf: &str) -> String {
        let mut parts: Vec<&str> = self.scope.iter().map(String::as_str).collect();
        if !leaf.is_empty() {
            parts.push(leaf);
        }
        parts.join(".")
    }

    /// Runs `f` with `name` appended to the naming scope.
    pub fn scoped<R>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> R) -> R {
        self.scope.push(name.to_string());
        let r = f(self);
        self.scope.pop();
        r
    }

    pub fn begin_cell(&mut self, name: &str, kind: CellKind) {
        assert!(self.open_cell.is_none(), "cell {name} opened inside another cell");
        self.open_cell = Some((name.to_string(), kind, self.nodes.len()));
        self.scope.push(name.to_string());
    }

    pub fn end_cell(&mut self) {
        let (name, kind, start) = self.open_cell.take().expect("end_cell without begin_cell");
        self.scope.pop();
        self.cells.push(CellSpan {
            name,
            kind,
            nodes: start..self.nodes.len(),
        });
    }

    fn push(&mut self, leaf: &str, op: Op, inputs: Vec<NodeId>, shape: [usize; 3]) -> NodeId {
        let name = self.path(leaf);
        self.nodes.push(Node { name, op, inputs });
        self.shapes.push(shape);
        self.nodes.len() - 1
    }

    pub fn input(&mut self, index: usize) -> NodeId {
        let shape = self.inputs[index];
        self.push(&format!("input{index}"), Op::Input { index }, vec![], shape)
    }

    pub fn conv_with(&mut self, x: NodeId, leaf: &str, out_channels: usize, params: ConvParams) -> NodeId {
        let [c, h, w] = self.shapes[x];
        assert!(
            c % params.groups == 0 && out_channels.is_multiple_of(params.groups),
            "{}: groups {} vs channels {c}->{out_channels}",
            self.path(leaf),
            params.groups
        );
        let (oh, ow) = params
            .output_hw(h, w)
            .unwrap_or_else(|| panic!("{}: kernel does not fit {h}×{w}", self.path(leaf)));
        let spec = ConvSpec {
            weight: self.path(&format!("{leaf}.weight")),
            in_channels: c,
            out_channels,
            params,
        };
        self.push(leaf, Op::Conv(spec), vec![x], [out_channels, oh, ow])
    }

    pub fn conv(
        &mut self,
        x: NodeId,
        leaf: &str,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> NodeId {
        self.conv_with(x, leaf, out_channels, ConvParams::new(kernel, stride, padding))
    }

    /// `kernel × kernel` depthwise convolution with "same" padding.
    pub fn depthwise(&mut self, x: NodeId, leaf: &str, kernel: usize, stride: usize) -> NodeId {
        let c = self.channels(x);
        self.conv_with(x, leaf, c, ConvParams::new(kernel, stride, kernel / 2).with_groups(c))
    }

    pub fn bn(&mut self, x: NodeId, leaf: &str, eps: f32) -> NodeId {
        let shape = self.shapes[x];
        let spec = BnSpec {
            prefix: self.path(leaf),
            channels: shape[0],
            eps,
        };
        self.push(leaf, Op::BatchNorm(spec), vec![x], shape)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let shape = self.shapes[x];
        let leaf = format!("relu{}", self.nodes.len());
        self.push(&leaf, Op::Relu, vec![x], shape)
    }

    fn pool(&mut self, x: NodeId, op: fn(PoolParams) -> Op, tag: &str, p: PoolParams) -> NodeId {
        let [c, h, w] = self.shapes[x];
        let (oh, ow) = p.output_hw(h, w).expect("pool window does not fit");
        let leaf = format!("{tag}{}", self.nodes.len());
        self.push(&leaf, op(p), vec![x], [c, oh, ow])
    }

    pub fn max_pool(&mut self, x: NodeId, kernel: usize, stride: usize, padding: usize) -> NodeId {
        self.pool(x, Op::MaxPool, "maxpool", PoolParams::new(kernel, stride, padding))
    }

    pub fn avg_pool(&mut self, x: NodeId, kernel: usize, stride: usize, padding: usize) -> NodeId {
        self.pool(x, Op::AvgPool, "avgpool", PoolParams::new(kernel, stride, padding))
    }

    pub fn global_avg_pool(&mut self, x: NodeId) -> NodeId {
        let c = self.channels(x);
        self.push("global_pool", Op::GlobalAvgPool, vec![x], [c, 1, 1])
    }

    pub fn add(&mut self, parts: &[NodeId]) -> NodeId {
        let shape = self.shapes[parts[0]];
        for &p in parts {
            assert_eq!(self.shapes[p], shape, "add operands at {}", self.path(""));
        }
        let leaf = format!("add{}", self.nodes.len());
        self.push(&leaf, Op::Add, parts.to_vec(), shape)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let [_, h, w] = self.shapes[parts[0]];
        let mut c = 0;
        for &p in parts {
            let [pc, ph, pw] = self.shapes[p];
            assert_eq!((ph, pw), (h, w), "concat operands at {}", self.path(""));
            c += pc;
        }
        let leaf = format!("concat{}", self.nodes.len());
        self.push(&leaf, Op::Concat, parts.to_vec(), [c, h, w])
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let [c, h, w] = self.shapes[x];
        assert!(start + len <= c && len > 0);
        let leaf = format!("slice{}", self.nodes.len());
        self.push(&leaf, Op::Slice { start, len }, vec![x], [len, h, w])
    }

    pub fn shuffle(&mut self, x: NodeId, groups: usize) -> NodeId {
        let shape = self.shapes[x];
        assert_eq!(shape[0] % groups, 0);
        self.push("shuffle", Op::Shuffle { groups }, vec![x], shape)
    }

    pub fn shift_crop(&mut self, x: NodeId) -> NodeId {
        let shape = self.shapes[x];
        let leaf = format!("shift{}", self.nodes.len());
        self.push(&leaf, Op::ShiftCrop, vec![x], shape)
    }

    pub fn linear(&mut self, x: NodeId, leaf: &str, out_features: usize) -> NodeId {
        let [c, h, w] = self.shapes[x];
        assert_eq!((h, w), (1, 1), "linear expects pooled input");
        let spec = LinearSpec {
            weight: self.path(&format!("{leaf}.weight")),
            bias: self.path(&format!("{leaf}.bias")),
            in_features: c,
            out_features,
        };
        self.push(leaf, Op::Linear(spec), vec![x], [out_features, 1, 1])
    }

    /// ReLU, then two depthwise/pointwise/BN stages. Only the first depthwise is strided.
    ///
    /// The regular form widens to `out` in the second pointwise conv; the stem
    /// form (`stem = true`) does so in the first.
    #[allow(clippy::too_many_arguments)]
    pub fn separable_branch(
        &mut self,
        x: NodeId,
        leaf: &str,
        in_channels: usize,
        out: usize,
        kernel: usize,
        stride: usize,
        stem: bool,
    ) -> NodeId {
        assert_eq!(self.channels(x), in_channels, "separable branch input width");
        let mid = if stem { out } else { in_channels };
        self.scoped(leaf, |b| {
            let y = b.relu(x);
            let y = b.depthwise(y, "dw1", kernel, stride);
            let y = b.conv(y, "pw1", mid, 1, 1, 0);
            let y = b.bn(y, "bn1", 1e-3);
            let y = b.relu(y);
            let y = b.depthwise(y, "dw2", kernel, 1);
            let y = b.conv(y, "pw2", out, 1, 1, 0);
            b.bn(y, "bn2", 1e-3)
        })
    }

    pub fn set_output(&mut self, name: &str, id: NodeId) {
        self.outputs.insert(name.to_string(), id);
    }

    pub fn finish(self) -> Graph {
        assert!(self.open_cell.is_none(), "unterminated cell");
        Graph {
            name: self.name,
            nodes: self.nodes,
            shapes: self.shapes,
            inputs: self.inputs,
            outputs: self.outputs,
            cells: self.cells,
        }
    }
}
