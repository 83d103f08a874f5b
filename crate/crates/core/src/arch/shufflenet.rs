//! ShuffleNetV2 at 0.5× width with a single-logit head.

use crate::error::{Error, Result};
use crate::graph::{CellKind, Graph, GraphBuilder, NodeId};

pub const STEM_WIDTH: usize = 24;
pub const STAGE_WIDTHS: [usize; 3] = [48, 96, 192];
pub const NORMAL_CELLS: [usize; 3] = [3, 7, 3];
pub const FULL_FINAL_FILTERS: usize = 1024;
pub const ONFIRE_FINAL_FILTERS: usize = 64;
const BN_EPS: f32 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ShuffleConfig {
    /// Filters in the final 1×1 convolution; `1024 - pruned`.
    pub final_filters: usize,
}

impl ShuffleConfig {
    pub fn new(final_filters: usize) -> Result<Self> {
        let cfg = Self { final_filters };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn onfire() -> Self {
        Self {
            final_filters: ONFIRE_FINAL_FILTERS,
        }
    }

    pub fn full() -> Self {
        Self {
            final_filters: FULL_FINAL_FILTERS,
        }
    }

    pub fn pruned(k: usize) -> Result<Self> {
        if k >= FULL_FINAL_FILTERS {
            return Err(Error::Config(format!(
                "cannot prune {k} of {FULL_FINAL_FILTERS} final filters"
            )));
        }
        Self::new(FULL_FINAL_FILTERS - k)
    }

    pub fn pruned_filters(&self) -> usize {
        FULL_FINAL_FILTERS - self.final_filters
    }

    pub fn validate(&self) -> Result<()> {
        if self.final_filters == 0 || self.final_filters > FULL_FINAL_FILTERS {
            return Err(Error::Config(format!(
                "final filter count {} outside 1..={FULL_FINAL_FILTERS}",
                self.final_filters
            )));
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_bn(
    b: &mut GraphBuilder,
    x: NodeId,
    name: &str,
    out: usize,
    k: usize,
    s: usize,
    p: usize,
    relu: bool,
) -> NodeId {
    let y = b.scoped(name, |b| {
        let y = b.conv(x, "conv", out, k, s, p);
        b.bn(y, "bn", BN_EPS)
    });
    if relu {
        b.relu(y)
    } else {
        y
    }
}

fn dw_bn(b: &mut GraphBuilder, x: NodeId, name: &str, stride: usize) -> NodeId {
    b.scoped(name, |b| {
        let y = b.depthwise(x, "conv", 3, stride);
        b.bn(y, "bn", BN_EPS)
    })
}

/// Splits the input in half; the right half runs pw → dw → pw, the left half
/// passes through. The two are concatenated and shuffled with two groups.
pub fn normal_cell(b: &mut GraphBuilder, x: NodeId, name: &str) -> NodeId {
    let c = b.channels(x);
    assert!(
        c.is_multiple_of(2),
        "{name}: normal cell needs an even channel count, got {c}"
    );
    let half = c / 2;
    b.begin_cell(name, CellKind::ShuffleNormal);
    let left = b.slice(x, 0, half);
    let right = b.slice(x, half, half);
    let r = b.scoped("branch2", |b| {
        let r = conv_bn(b, right, "pw1", half, 1, 1, 0, true);
        let r = dw_bn(b, r, "dw", 1);
        conv_bn(b, r, "pw2", half, 1, 1, 0, true)
    });
    let y = b.concat(&[left, r]);
    let y = b.shuffle(y, 2);
    b.end_cell();
    y
}

/// Both branches see the whole input and halve the resolution; each emits `c_out / 2` channels.
pub fn reduction_cell(b: &mut GraphBuilder, x: NodeId, name: &str, c_out: usize) -> NodeId {
    assert!(
        c_out.is_multiple_of(2),
        "{name}: reduction cell needs an even output width, got {c_out}"
    );
    let half = c_out / 2;
    b.begin_cell(name, CellKind::ShuffleReduction);
    let l = b.scoped("branch1", |b| {
        let l = dw_bn(b, x, "dw", 2);
        conv_bn(b, l, "pw", half, 1, 1, 0, true)
    });
    let r = b.scoped("branch2", |b| {
        let r = conv_bn(b, x, "pw1", half, 1, 1, 0, true);
        let r = dw_bn(b, r, "dw", 2);
        conv_bn(b, r, "pw2", half, 1, 1, 0, true)
    });
    let y = b.concat(&[l, r]);
    let y = b.shuffle(y, 2);
    b.end_cell();
    y
}

/// Graph with outputs `logits`, `features` (pooled, `F × 1 × 1`) and
/// `final_conv` (the activation feeding the pool).
pub fn build(cfg: &ShuffleConfig, name: &str, input_size: usize) -> Result<Graph> {
    cfg.validate()?;
    if input_size < 32 {
        return Err(Error::Config(format!(
            "input size {input_size} below the 32-pixel minimum"
        )));
    }
    let mut b = GraphBuilder::new(name, vec![[3, input_size, input_size]]);
    let x = b.input(0);
    b.begin_cell("stem", CellKind::Stem);
    let y = conv_bn(&mut b, x, "conv1", STEM_WIDTH, 3, 2, 1, true);
    let mut y = b.max_pool(y, 3, 2, 1);
    b.end_cell();
    for (s, (&width, &normals)) in STAGE_WIDTHS.iter().zip(&NORMAL_CELLS).enumerate() {
        let stage = format!("stage{}", s + 2);
        y = reduction_cell(&mut b, y, &format!("{stage}.0"), width);
        for i in 1..=normals {
            y = normal_cell(&mut b, y, &format!("{stage}.{i}"));
        }
    }
    b.begin_cell("conv5", CellKind::FinalConv);
    let y = b.conv(y, "conv", cfg.final_filters, 1, 1, 0);
    let y = b.bn(y, "bn", BN_EPS);
    let y = b.relu(y);
    b.end_cell();
    b.set_output("final_conv", y);
    let f = b.global_avg_pool(y);
    b.set_output("features", f);
    b.begin_cell("head", CellKind::Head);
    let z = b.linear(f, "fc", 1);
    b.end_cell();
    b.set_output("logits", z);
    Ok(b.finish())
}

/// Parameters of the final convolution for a given filter count.
pub fn final_conv_params(final_filters: usize) -> usize {
    final_filters * STAGE_WIDTHS[2]
}

/// Name of the final convolution weight and its batch-norm prefix.
pub const FINAL_CONV_WEIGHT: &str = "conv5.conv.weight";
pub const FINAL_BN_PREFIX: &str = "conv5.bn";
pub const HEAD_WEIGHT: &str = "head.fc.weight";
pub const HEAD_BIAS: &str = "head.fc.bias";
