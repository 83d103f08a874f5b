use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{ConvParams, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolParams {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl PoolParams {
    pub fn new(kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            kernel,
            stride,
            padding,
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        ConvParams::new(self.kernel, self.stride, self.padding).output_hw(h, w)
    }
}

#[derive(Clone, Copy)]
enum Reduce {
    Max,
    Mean,
}

pub fn max_pool2d(input: &Tensor, p: PoolParams) -> Result<Tensor> {
    pool(input, p, Reduce::Max, "max_pool2d")
}

/// Average pooling; the divisor counts only in-bounds cells.
pub fn avg_pool2d(input: &Tensor, p: PoolParams) -> Result<Tensor> {
    pool(input, p, Reduce::Mean, "avg_pool2d")
}

fn pool(input: &Tensor, p: PoolParams, reduce: Reduce, op: &'static str) -> Result<Tensor> {
    if p.kernel == 0 || p.stride == 0 || p.padding >= p.kernel {
        return Err(Error::invalid(
            op,
            format!(
                "degenerate window: kernel {}, stride {}, padding {}",
                p.kernel, p.stride, p.padding
            ),
        ));
    }
    let [n, c, h, w] = input.dims();
    let (oh, ow) = p.output_hw(h, w).ok_or_else(|| {
        Error::shape(
            op,
            "spatial extent",
            format!("{h}×{w} input smaller than {} window", p.kernel),
        )
    })?;
    let mut out = vec![0.0f32; n * c * oh * ow];
    if oh * ow > 0 {
        out.par_chunks_mut(oh * ow).enumerate().for_each(|(plane, dst)| {
            let src = &input.data()[plane * h * w..(plane + 1) * h * w];
            for oy in 0..oh {
                let y0 = (oy * p.stride).saturating_sub(p.padding);
                let y1 = (oy * p.stride + p.kernel - p.padding).min(h);
                for ox in 0..ow {
                    let x0 = (ox * p.stride).saturating_sub(p.padding);
                    let x1 = (ox * p.stride + p.kernel - p.padding).min(w);
                    dst[oy * ow + ox] = match reduce {
                        Reduce::Max => {
                            let mut m = f32::NEG_INFINITY;
                            for y in y0..y1 {
                                for &v in &src[y * w + x0..y * w + x1] {
                                    m = m.max(v);
                                }
                            }
                            m
                        }
                        Reduce::Mean => {
                            let mut s = 0.0f64;
                            for y in y0..y1 {
                                for &v in &src[y * w + x0..y * w + x1] {
                                    s += v as f64;
                                }
                            }
                            (s / ((y1 - y0) * (x1 - x0)) as f64) as f32
                        }
                    };
                }
            }
        });
    }
    Ok(Tensor::from_parts([n, c, oh, ow], out))
}

/// Per-channel spatial mean, giving `N × C × 1 × 1`.
pub fn global_avg_pool(input: &Tensor) -> Tensor {
    let [n, c, h, w] = input.dims();
    let hw = h * w;
    let data = input
        .data()
        .chunks(hw.max(1))
        .take(n * c)
        .map(|plane| {
            if hw == 0 {
                0.0
            } else {
                (plane.iter().map(|&v| v as f64).sum::<f64>() / hw as f64) as f32
            }
        })
        .collect();
    Tensor::from_parts([n, c, 1, 1], data)
}
