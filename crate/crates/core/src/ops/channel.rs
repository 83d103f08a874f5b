use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Channels `start..start + len` of every batch item.
pub fn slice_channels(input: &Tensor, start: usize, len: usize) -> Result<Tensor> {
    let [n, c, h, w] = input.dims();
    if start + len > c || len == 0 {
        return Err(Error::invalid(
            "slice_channels",
            format!("range {start}..{} outside 0..{c}", start + len),
        ));
    }
    let hw = h * w;
    let mut out = Vec::with_capacity(n * len * hw);
    for ni in 0..n {
        let item = input.item(ni);
        out.extend_from_slice(&item[start * hw..(start + len) * hw]);
    }
    Ok(Tensor::from_parts([n, len, h, w], out))
}

/// Splits into the first `c_left` channels and the remainder, order preserved.
pub fn channel_split(input: &Tensor, c_left: usize) -> Result<(Tensor, Tensor)> {
    let c = input.channels();
    if c_left == 0 || c_left >= c {
        return Err(Error::invalid(
            "channel_split",
            format!("split point {c_left} must lie strictly inside 0..{c}"),
        ));
    }
    Ok((
        slice_channels(input, 0, c_left)?,
        slice_channels(input, c_left, c - c_left)?,
    ))
}

pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::invalid("concat_channels", "no inputs"))?;
    let [n, _, h, w] = first.dims();
    for p in parts {
        let [pn, _, ph, pw] = p.dims();
        if (pn, ph, pw) != (n, h, w) {
            return Err(Error::shape(
                "concat_channels",
                "batch/spatial extents",
                format!("{:?} vs {:?}", p.dims(), first.dims()),
            ));
        }
    }
    let c: usize = parts.iter().map(|p| p.channels()).sum();
    let mut out = Vec::with_capacity(n * c * h * w);
    for ni in 0..n {
        for p in parts {
            out.extend_from_slice(p.item(ni));
        }
    }
    Ok(Tensor::from_parts([n, c, h, w], out))
}

/// Position that input channel `i` occupies after a `groups`-way shuffle of `c` channels.
///
/// Channels are viewed as a `groups × (c / groups)` matrix and transposed, so
/// the output lists channel 0 of every group, then channel 1 of every group, and so on.
pub fn shuffled_position(i: usize, c: usize, groups: usize) -> usize {
    let per_group = c / groups;
    (i % per_group) * groups + i / per_group
}

pub fn channel_shuffle(input: &Tensor, groups: usize) -> Result<Tensor> {
    let [n, c, h, w] = input.dims();
    if groups == 0 || c % groups != 0 {
        return Err(Error::invalid(
            "channel_shuffle",
            format!("{groups} groups do not divide {c} channels"),
        ));
    }
    let hw = h * w;
    let mut out = vec![0.0f32; input.len()];
    for ni in 0..n {
        let src = input.item(ni);
        let dst = &mut out[ni * c * hw..(ni + 1) * c * hw];
        for i in 0..c {
            let j = shuffled_position(i, c, groups);
            dst[j * hw..(j + 1) * hw].copy_from_slice(&src[i * hw..(i + 1) * hw]);
        }
    }
    Ok(Tensor::from_parts(input.dims(), out))
}

/// Elementwise sum of equally shaped tensors.
pub fn add(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts.first().ok_or_else(|| Error::invalid("add", "no inputs"))?;
    if let Some(bad) = parts.iter().find(|p| p.dims() != first.dims()) {
        return Err(Error::shape(
            "add",
            "operand extents",
            format!("{:?} vs {:?}", bad.dims(), first.dims()),
        ));
    }
    let mut acc: Vec<f64> = first.data().iter().map(|&v| v as f64).collect();
    for p in &parts[1..] {
        for (a, &v) in acc.iter_mut().zip(p.data()) {
            *a += v as f64;
        }
    }
    Ok(Tensor::from_parts(
        first.dims(),
        acc.into_iter().map(|v| v as f32).collect(),
    ))
}

/// Shifts content up and left by one pixel, filling the last row and column with zeros.
///
/// Followed by a stride-2 1×1 convolution this samples the odd-offset grid,
/// the second path of a factorized reduction.
pub fn shift_crop(input: &Tensor) -> Tensor {
    let [n, c, h, w] = input.dims();
    Tensor::from_fn([n, c, h, w], |ni, ci, y, x| {
        if y + 1 < h && x + 1 < w {
            input.at(ni, ci, y + 1, x + 1)
        } else {
            0.0
        }
    })
}
