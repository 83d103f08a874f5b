use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Source sampling for one output coordinate: lower index, upper index, upper weight.
fn sample_axis(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let scale = src_len as f64 / dst_len as f64;
    let s = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, s - i0 as f64)
}

/// Bilinear resize with half-pixel centres and edge clamping.
pub fn bilinear_resize(image: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let [n, c, h, w] = image.dims();
    if h == 0 || w == 0 {
        return Err(Error::invalid("bilinear_resize", "empty input image"));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid(
            "bilinear_resize",
            format!("output size {out_h}×{out_w}"),
        ));
    }
    let rows: Vec<_> = (0..out_h).map(|y| sample_axis(y, h, out_h)).collect();
    let cols: Vec<_> = (0..out_w).map(|x| sample_axis(x, w, out_w)).collect();
    let mut out = Vec::with_capacity(n * c * out_h * out_w);
    for plane in image.data().chunks(h * w).take(n * c) {
        for &(y0, y1, fy) in &rows {
            for &(x0, x1, fx) in &cols {
                let p = |y: usize, x: usize| plane[y * w + x] as f64;
                let top = p(y0, x0) * (1.0 - fx) + p(y0, x1) * fx;
                let bottom = p(y1, x0) * (1.0 - fx) + p(y1, x1) * fx;
                out.push((top * (1.0 - fy) + bottom * fy) as f32);
            }
        }
    }
    Ok(Tensor::from_parts([n, c, out_h, out_w], out))
}
