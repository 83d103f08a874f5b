use super::{Graph, NodeId, Op};
use crate::error::{Error, Result};
use crate::ops;
use crate::tensor::{BatchNormParams, Tensor};
use crate::weights::WeightStore;

impl Graph {
    /// Evaluates the nodes needed for `wanted` and returns their values in that order.
    ///
    /// Inputs must match the declared channel counts; spatial extents may
    /// differ from the declared resolution as long as every kernel still fits.
    /// Intermediate values are dropped as soon as their last consumer has run.
    pub fn execute(&self, weights: &WeightStore, inputs: &[&Tensor], wanted: &[NodeId]) -> Result<Vec<Tensor>> {
        if inputs.len() != self.inputs.len() {
            return Err(Error::invalid(
                "execute",
                format!("graph takes {} inputs, got {}", self.inputs.len(), inputs.len()),
            ));
        }
        for (i, (t, decl)) in inputs.iter().zip(&self.inputs).enumerate() {
            if t.channels() != decl[0] {
                return Err(Error::shape(
                    "execute",
                    "input channels",
                    format!("input {i} has {} channels, graph expects {}", t.channels(), decl[0]),
                ));
            }
        }
        let n = inputs.first().map(|t| t.batch()).unwrap_or(0);
        if inputs.iter().any(|t| t.batch() != n) {
            return Err(Error::shape(
                "execute",
                "batch",
                "inputs disagree on batch size".to_string(),
            ));
        }

        // Mark what is reachable backwards from the requested outputs.
        let mut needed = vec![false; self.nodes.len()];
        for &w in wanted {
            needed[w] = true;
        }
        for id in (0..self.nodes.len()).rev() {
            if needed[id] {
                for &i in &self.nodes[id].inputs {
                    needed[i] = true;
                }
            }
        }
        let mut remaining = vec![0usize; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            if needed[id] {
                for &i in &node.inputs {
                    remaining[i] += 1;
                }
            }
        }
        for &w in wanted {
            remaining[w] += 1;
        }

        let mut values: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            if !needed[id] {
                continue;
            }
            let args: Vec<&Tensor> = node
                .inputs
                .iter()
                .map(|&i| values[i].as_ref().expect("topological order"))
                .collect();
            let out = self
                .eval(&node.op, &args, inputs, weights)
                .map_err(|e| annotate(e, &node.name))?;
            drop(args);
            values[id] = Some(out);
            for &i in &node.inputs {
                remaining[i] -= 1;
                if remaining[i] == 0 {
                    values[i] = None;
                }
            }
        }
        Ok(wanted
            .iter()
            .map(|&w| values[w].clone().expect("requested node evaluated"))
            .collect())
    }

    fn eval(&self, op: &Op, args: &[&Tensor], inputs: &[&Tensor], weights: &WeightStore) -> Result<Tensor> {
        Ok(match op {
            Op::Input { index } => inputs[*index].clone(),
            Op::Conv(c) => {
                let w = weights.get(&c.weight)?;
                ops::conv2d(args[0], w, c.params)?
            }
            Op::BatchNorm(bn) => {
                let p = BatchNormParams {
                    gamma: weights.get(&bn.gamma())?.data().to_vec(),
                    beta: weights.get(&bn.beta())?.data().to_vec(),
                    mean: weights.get(&bn.running_mean())?.data().to_vec(),
                    var: weights.get(&bn.running_var())?.data().to_vec(),
                    eps: bn.eps,
                };
                ops::batch_norm_infer(args[0], &p)?
            }
            Op::Relu => ops::relu(args[0]),
            Op::MaxPool(p) => ops::max_pool2d(args[0], *p)?,
            Op::AvgPool(p) => ops::avg_pool2d(args[0], *p)?,
            Op::GlobalAvgPool => ops::global_avg_pool(args[0]),
            Op::Add => ops::add(args)?,
            Op::Concat => ops::concat_channels(args)?,
            Op::Slice { start, len } => ops::slice_channels(args[0], *start, *len)?,
            Op::Shuffle { groups } => ops::channel_shuffle(args[0], *groups)?,
            Op::ShiftCrop => ops::shift_crop(args[0]),
            Op::Linear(l) => {
                let x = args[0];
                let [n, c, h, w] = x.dims();
                if (c, h, w) != (l.in_features, 1, 1) {
                    return Err(Error::shape(
                        "linear",
                        "input features",
                        format!("expected {}×1×1, got {c}×{h}×{w}", l.in_features),
                    ));
                }
                let wt = weights.get(&l.weight)?;
                let b = weights.get(&l.bias)?;
                let mut out = Vec::with_capacity(n * l.out_features);
                for i in 0..n {
                    out.extend(ops::linear(x.item(i), wt.data(), b.data())?);
                }
                Tensor::new([n, l.out_features, 1, 1], out)?
            }
        })
    }
}

fn annotate(e: Error, node: &str) -> Error {
    match e {
        Error::Shape { op, what, detail } => Error::Shape {
            op,
            what,
            detail: format!("{detail} (at node {node})"),
        },
        other => other,
    }
}
