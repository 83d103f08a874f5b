use crate::error::{Error, Result};
use crate::tensor::{BatchNormParams, Tensor};

/// Inference-mode batch norm: `gamma * (x - mean) / sqrt(var + eps) + beta` per channel.
pub fn batch_norm_infer(input: &Tensor, p: &BatchNormParams) -> Result<Tensor> {
    p.validate()?;
    let [n, c, h, w] = input.dims();
    if p.channels() != c {
        return Err(Error::shape(
            "batch_norm",
            "channels",
            format!("parameters for {} channels, input has {c}", p.channels()),
        ));
    }
    let scale: Vec<f64> = (0..c)
        .map(|i| p.gamma[i] as f64 / (p.var[i] as f64 + p.eps as f64).sqrt())
        .collect();
    let hw = h * w;
    let mut out = Vec::with_capacity(input.len());
    for (plane, src) in input.data().chunks(hw.max(1)).take(n * c).enumerate() {
        let ci = plane % c;
        let (mu, s, b) = (p.mean[ci] as f64, scale[ci], p.beta[ci] as f64);
        out.extend(src.iter().map(|&x| ((x as f64 - mu) * s + b) as f32));
    }
    Ok(Tensor::from_parts(input.dims(), out))
}
