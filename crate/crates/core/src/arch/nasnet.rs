//! NASNet-A mobile cells and the reduced-depth family built from them.

use crate::error::{Error, Result};
use crate::graph::{CellKind, Graph, GraphBuilder, NodeId};

pub const STEM_FILTERS: usize = 32;
pub const MOBILE_PENULTIMATE: usize = 1056;
pub const REDUCED_PENULTIMATE: usize = 480;
const BN_EPS: f32 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NasConfig {
    /// Normal cells in each of the first two groups.
    pub a_n: usize,
    /// Normal cells in the third group: `a_n` or 0.
    pub a_3: usize,
    /// Width the base cell count is derived from; `F0 = penultimate / 24`.
    pub penultimate: usize,
}

impl NasConfig {
    pub fn new(a_n: usize, a_3: usize, penultimate: usize) -> Result<Self> {
        let cfg = Self { a_n, a_3, penultimate };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn onfire() -> Self {
        Self {
            a_n: 2,
            a_3: 2,
            penultimate: MOBILE_PENULTIMATE,
        }
    }

    pub fn mobile() -> Self {
        Self {
            a_n: 4,
            a_3: 4,
            penultimate: MOBILE_PENULTIMATE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.a_n, 2 | 4) {
            return Err(Error::Config(format!("A_N must be 2 or 4, got {}", self.a_n)));
        }
        if self.a_3 != 0 && self.a_3 != self.a_n {
            return Err(Error::Config(format!(
                "A_3 must be 0 or A_N ({}), got {}",
                self.a_n, self.a_3
            )));
        }
        // F0 must itself split into quarters for the first stem cell.
        if self.penultimate == 0 || !self.penultimate.is_multiple_of(96) {
            return Err(Error::Config(format!(
                "penultimate filters {} must be a positive multiple of 96",
                self.penultimate
            )));
        }
        Ok(())
    }

    /// Base cell width `F0`.
    pub fn base_width(&self) -> usize {
        self.penultimate / 24
    }

    /// Channels reaching the global pool: `24·F0`, or `16·F0` without a third group.
    pub fn feature_width(&self) -> usize {
        if self.a_3 > 0 {
            24 * self.base_width()
        } else {
            16 * self.base_width()
        }
    }
}

/// ReLU → 1×1 conv → BN.
fn adjust(b: &mut GraphBuilder, x: NodeId, name: &str, out: usize) -> NodeId {
    b.scoped(name, |b| {
        let y = b.relu(x);
        let y = b.conv(y, "conv", out, 1, 1, 0);
        b.bn(y, "bn", BN_EPS)
    })
}

/// Halves the resolution with two stride-2 1×1 convolutions, the second on
/// the input shifted by one pixel; their outputs are concatenated and normalised.
pub fn factorized_reduction(b: &mut GraphBuilder, x: NodeId, out: usize) -> NodeId {
    assert!(
        out.is_multiple_of(2),
        "factorized reduction needs an even width, got {out}"
    );
    let y = b.relu(x);
    let p1 = b.scoped("path_1", |b| b.conv(y, "conv", out / 2, 1, 2, 0));
    let shifted = b.shift_crop(y);
    let p2 = b.scoped("path_2", |b| b.conv(shifted, "conv", out / 2, 1, 2, 0));
    let cat = b.concat(&[p1, p2]);
    b.bn(cat, "final_path_bn", BN_EPS)
}

fn sep(b: &mut GraphBuilder, x: NodeId, name: &str, out: usize, k: usize, stride: usize) -> NodeId {
    let c = b.channels(x);
    b.separable_branch(x, name, c, out, k, stride, false)
}

/// `h` is the previous cell's output, `h_prev` the one before. Output is `6f`
/// channels at the resolution of `h`.
pub fn normal_cell(b: &mut GraphBuilder, h: NodeId, h_prev: NodeId, name: &str, f: usize) -> NodeId {
    b.begin_cell(name, CellKind::NasNormal);
    let r = adjust(b, h, "conv_1x1", f);
    let [_, rh, rw] = b.shape(r);
    let [_, ph, pw] = b.shape(h_prev);
    let l = if (ph, pw) == (rh, rw) {
        adjust(b, h_prev, "conv_prev_1x1", f)
    } else {
        factorized_reduction(b, h_prev, f)
    };
    assert_eq!(b.shape(l), b.shape(r), "{name}: adjusted inputs disagree");

    let a = sep(b, r, "comb_iter_0_left", f, 5, 1);
    let c = sep(b, l, "comb_iter_0_right", f, 3, 1);
    let i0 = b.add(&[a, c]);
    let a = sep(b, l, "comb_iter_1_left", f, 5, 1);
    let c = sep(b, l, "comb_iter_1_right", f, 3, 1);
    let i1 = b.add(&[a, c]);
    let a = b.avg_pool(r, 3, 1, 1);
    let i2 = b.add(&[a, l]);
    let a = b.avg_pool(l, 3, 1, 1);
    let c = b.avg_pool(l, 3, 1, 1);
    let i3 = b.add(&[a, c]);
    let a = sep(b, r, "comb_iter_4_left", f, 3, 1);
    let i4 = b.add(&[a, r]);
    let out = b.concat(&[l, i0, i1, i2, i3, i4]);
    b.end_cell();
    out
}

/// Shared body of the reduction and stem cells. `cur` already has `f`
/// channels; `prev` is fed to stem-form branches when `stem_prev` is set.
fn reduction_body(b: &mut GraphBuilder, cur: NodeId, prev: NodeId, f: usize, stem_prev: bool) -> NodeId {
    let pc = b.channels(prev);
    let psep = |b: &mut GraphBuilder, name: &str, k: usize| b.separable_branch(prev, name, pc, f, k, 2, stem_prev);

    let a = sep(b, cur, "comb_iter_0_left", f, 5, 2);
    let c = psep(b, "comb_iter_0_right", 7);
    let i0 = b.add(&[a, c]);
    let a = b.max_pool(cur, 3, 2, 1);
    let c = psep(b, "comb_iter_1_right", 7);
    let i1 = b.add(&[a, c]);
    let a = b.avg_pool(cur, 3, 2, 1);
    let c = psep(b, "comb_iter_2_right", 5);
    let i2 = b.add(&[a, c]);
    let a = b.avg_pool(i0, 3, 1, 1);
    let i3 = b.add(&[a, i1]);
    let a = sep(b, i0, "comb_iter_4_left", f, 3, 1);
    let c = b.max_pool(cur, 3, 2, 1);
    let i4 = b.add(&[a, c]);
    b.concat(&[i1, i2, i3, i4])
}

/// Halves the resolution of `h` and emits `4f` channels. `h` and `h_prev`
/// must share a resolution.
pub fn reduction_cell(b: &mut GraphBuilder, h: NodeId, h_prev: NodeId, name: &str, f: usize) -> NodeId {
    b.begin_cell(name, CellKind::NasReduction);
    let cur = adjust(b, h, "conv_1x1", f);
    let prev = adjust(b, h_prev, "conv_prev_1x1", f);
    assert_eq!(b.shape(cur), b.shape(prev), "{name}: inputs disagree in resolution");
    let out = reduction_body(b, cur, prev, f, false);
    b.end_cell();
    out
}

fn stem_cell_0(b: &mut GraphBuilder, conv0: NodeId, f: usize) -> NodeId {
    b.begin_cell("cell_stem_0", CellKind::NasStem);
    let cur = adjust(b, conv0, "conv_1x1", f);
    let out = reduction_body(b, cur, conv0, f, true);
    b.end_cell();
    out
}

fn stem_cell_1(b: &mut GraphBuilder, conv0: NodeId, stem0: NodeId, f: usize) -> NodeId {
    b.begin_cell("cell_stem_1", CellKind::NasStem);
    let cur = adjust(b, stem0, "conv_1x1", f);
    let prev = factorized_reduction(b, conv0, f);
    assert_eq!(b.shape(cur), b.shape(prev), "cell_stem_1: inputs disagree");
    let out = reduction_body(b, cur, prev, f, false);
    b.end_cell();
    out
}

/// Graph with outputs `logits` and `features` (pooled penultimate activations).
pub fn build(cfg: &NasConfig, name: &str, input_size: usize) -> Result<Graph> {
    cfg.validate()?;
    if input_size < 64 {
        return Err(Error::Config(format!(
            "input size {input_size} below the 64-pixel minimum"
        )));
    }
    let f0 = cfg.base_width();
    let mut b = GraphBuilder::new(name, vec![[3, input_size, input_size]]);
    let x = b.input(0);
    b.begin_cell("conv0", CellKind::Stem);
    let y = b.conv(x, "conv", STEM_FILTERS, 3, 2, 0);
    let conv0 = b.bn(y, "bn", BN_EPS);
    b.end_cell();

    let stem0 = stem_cell_0(&mut b, conv0, f0 / 4);
    let stem1 = stem_cell_1(&mut b, conv0, stem0, f0 / 2);

    let (mut prev, mut cur) = (stem0, stem1);
    let mut normal_idx = 0;
    for (group, count) in [cfg.a_n, cfg.a_n, cfg.a_3].into_iter().enumerate() {
        let f = f0 << group;
        if group > 0 {
            let red = reduction_cell(&mut b, cur, prev, &format!("reduction_cell_{}", group - 1), f);
            (prev, cur) = (cur, red);
        }
        for _ in 0..count {
            let next = normal_cell(&mut b, cur, prev, &format!("cell_{normal_idx}"), f);
            normal_idx += 1;
            (prev, cur) = (cur, next);
        }
    }
    debug_assert_eq!(b.channels(cur), cfg.feature_width());

    let y = b.relu(cur);
    let feats = b.global_avg_pool(y);
    b.set_output("features", feats);
    b.begin_cell("head", CellKind::Head);
    let z = b.linear(feats, "fc", 1);
    b.end_cell();
    b.set_output("logits", z);
    Ok(b.finish())
}
