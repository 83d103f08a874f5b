use crate::error::{Error, Result};

/// `weight · x + bias` with `weight` stored row-major as `out × in`.
pub fn linear(features: &[f32], weight: &[f32], bias: &[f32]) -> Result<Vec<f32>> {
    let out = bias.len();
    let inp = features.len();
    if weight.len() != out * inp {
        return Err(Error::shape(
            "linear",
            "weight",
            format!("{} weights for {out} outputs × {inp} inputs", weight.len()),
        ));
    }
    Ok(weight
        .chunks(inp.max(1))
        .take(out)
        .zip(bias)
        .map(|(row, b)| {
            let dot: f64 = row.iter().zip(features).map(|(w, x)| *w as f64 * *x as f64).sum();
            (dot + *b as f64) as f32
        })
        .collect())
}
