use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{ConvParams, Tensor};

/// Grouped 2-D convolution without bias.
///
/// `weight` is `OC × IC/groups × KH × KW`. Each output element is reduced in
/// `f64` in a fixed (input channel, kh, kw) order, so results do not depend
/// on how the work is split across threads.
pub fn conv2d(input: &Tensor, weight: &Tensor, params: ConvParams) -> Result<Tensor> {
    const OP: &str = "conv2d";
    let [n, c_in, h, w] = input.dims();
    let [c_out, c_in_g, kh, kw] = weight.dims();
    let g = params.groups;
    if g == 0 || params.stride == 0 {
        return Err(Error::invalid(OP, "groups and stride must be positive"));
    }
    if c_in % g != 0 {
        return Err(Error::shape(
            OP,
            "input channels",
            format!("{c_in} not divisible by groups {g}"),
        ));
    }
    if c_out % g != 0 {
        return Err(Error::shape(
            OP,
            "output channels",
            format!("{c_out} not divisible by groups {g}"),
        ));
    }
    if c_in_g != c_in / g {
        return Err(Error::shape(
            OP,
            "weight input channels",
            format!("weight has {c_in_g}, input {c_in} / groups {g} = {}", c_in / g),
        ));
    }
    if kh != params.kernel_h || kw != params.kernel_w {
        return Err(Error::shape(
            OP,
            "kernel size",
            format!("weight {kh}×{kw}, params {}×{}", params.kernel_h, params.kernel_w),
        ));
    }
    let (oh, ow) = params.output_hw(h, w).ok_or_else(|| {
        Error::shape(
            OP,
            "spatial extent",
            format!(
                "{h}×{w} input too small for {kh}×{kw} kernel with padding {}",
                params.padding
            ),
        )
    })?;

    let c_out_g = c_out / g;
    let s = params.stride;
    let p = params.padding;
    let x = input.data();
    let wt = weight.data();
    let mut out = vec![0.0f32; n * c_out * oh * ow];
    if oh * ow == 0 {
        return Ok(Tensor::from_parts([n, c_out, oh, ow], out));
    }

    out.par_chunks_mut(oh * ow).enumerate().for_each(|(plane, dst)| {
        let ni = plane / c_out;
        let o = plane % c_out;
        let group = o / c_out_g;
        let mut acc = vec![0.0f64; oh * ow];
        for icg in 0..c_in_g {
            let ci = group * c_in_g + icg;
            let src = &x[(ni * c_in + ci) * h * w..(ni * c_in + ci + 1) * h * w];
            let wbase = (o * c_in_g + icg) * kh * kw;
            for ky in 0..kh {
                let (y0, y1) = valid_range(oh, h, ky, s, p);
                for kx in 0..kw {
                    let wv = wt[wbase + ky * kw + kx] as f64;
                    let (x0, x1) = valid_range(ow, w, kx, s, p);
                    if x0 >= x1 {
                        continue;
                    }
                    for oy in y0..y1 {
                        let iy = oy * s + ky - p;
                        let row = &src[iy * w..(iy + 1) * w];
                        let acc_row = &mut acc[oy * ow..(oy + 1) * ow];
                        if s == 1 {
                            let off = kx as isize - p as isize;
                            let ins = &row[(x0 as isize + off) as usize..(x1 as isize + off) as usize];
                            for (a, &v) in acc_row[x0..x1].iter_mut().zip(ins) {
                                *a += wv * v as f64;
                            }
                        } else {
                            for ox in x0..x1 {
                                acc_row[ox] += wv * row[ox * s + kx - p] as f64;
                            }
                        }
                    }
                }
            }
        }
        for (d, a) in dst.iter_mut().zip(&acc) {
            *d = *a as f32;
        }
    });
    Ok(Tensor::from_parts([n, c_out, oh, ow], out))
}

/// Per-channel convolution: `weight` is `C × 1 × KH × KW` and groups = C.
pub fn depthwise_conv2d(input: &Tensor, weight: &Tensor, params: ConvParams) -> Result<Tensor> {
    let c = input.channels();
    if params.groups != 1 && params.groups != c {
        return Err(Error::shape(
            "depthwise_conv2d",
            "groups",
            format!("groups {} must equal channel count {c}", params.groups),
        ));
    }
    if weight.dims()[0] != c || weight.dims()[1] != 1 {
        return Err(Error::shape(
            "depthwise_conv2d",
            "weight channels",
            format!("weight {:?} for {c} input channels", weight.dims()),
        ));
    }
    conv2d(input, weight, params.with_groups(c))
}

/// Output positions `o` in `[lo, hi)` for which `o*s + k - p` lands inside `0..extent`.
fn valid_range(out_extent: usize, extent: usize, k: usize, s: usize, p: usize) -> (usize, usize) {
    // o*s + k >= p  =>  o >= ceil((p - k) / s)
    let lo = if k >= p { 0 } else { (p - k).div_ceil(s) };
    // o*s + k - p <= extent - 1  =>  o <= (extent - 1 + p - k) / s
    let hi = if extent + p < k + 1 {
        0
    } else {
        ((extent - 1 + p - k) / s + 1).min(out_extent)
    };
    (lo.min(hi), hi)
}
