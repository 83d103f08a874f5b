//! Image → network input conversion.

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::ops::bilinear_resize;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preprocess {
    pub size: usize,
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl Default for Preprocess {
    fn default() -> Self {
        Self {
            size: crate::arch::INPUT_SIZE,
            mean: [0.485, 0.456, 0.406],
            std: [0.229, 0.224, 0.225],
        }
    }
}

/// Image as a `1 × 3 × H × W` tensor scaled to `[0, 1]`.
pub fn image_to_tensor(img: &RgbImage) -> Tensor {
    let (w, h) = (img.width(), img.height());
    Tensor::from_fn([1, 3, h, w], |_, c, y, x| {
        img.data()[(y * w + x) * 3 + c] as f32 / 255.0
    })
}

impl Preprocess {
    /// Resizes to `size × size`, scales to `[0, 1]` and normalises each channel.
    pub fn apply(&self, img: &RgbImage) -> Result<Tensor> {
        if img.is_empty() {
            return Err(Error::invalid("preprocess", "empty image"));
        }
        self.apply_tensor(&image_to_tensor(img))
    }

    /// Same as [`apply`](Self::apply) for an already scaled `1 × 3 × H × W` tensor.
    pub fn apply_tensor(&self, t: &Tensor) -> Result<Tensor> {
        let resized = if t.height() == self.size && t.width() == self.size {
            t.clone()
        } else {
            bilinear_resize(t, self.size, self.size)?
        };
        let hw = self.size * self.size;
        let mut data = resized.into_data();
        for (c, plane) in data.chunks_mut(hw).enumerate() {
            let (m, s) = (self.mean[c % 3], self.std[c % 3]);
            for v in plane {
                *v = (*v - m) / s;
            }
        }
        Tensor::new([1, 3, self.size, self.size], data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centred_red_channel() {
        let r = (0.485f32 * 255.0).round() as u8;
        let img = RgbImage::filled(224, 224, [r, 0, 0]);
        let t = Preprocess::default().apply(&img).unwrap();
        let expected = (r as f32 / 255.0 - 0.485) / 0.229;
        assert!(expected.abs() < 0.01);
        assert!(t.plane(0, 0).iter().all(|v| (v - expected).abs() < 1e-6));
    }

    #[test]
    fn native_size_is_not_resampled() {
        let img = RgbImage::from_fn(224, 224, |x, y| {
            [(x % 256) as u8, (y % 256) as u8, ((x * y) % 256) as u8]
        });
        let p = Preprocess {
            mean: [0.0; 3],
            std: [1.0; 3],
            ..Default::default()
        };
        let t = p.apply(&img).unwrap();
        assert_eq!(t, image_to_tensor(&img));
    }

    #[test]
    fn matches_scalar_reference() {
        let img = RgbImage::from_fn(37, 19, |x, y| {
            [(x * 7 % 256) as u8, (y * 13 % 256) as u8, ((x + y) * 5 % 256) as u8]
        });
        let p = Preprocess::default();
        let t = p.apply(&img).unwrap();
        let (sx, sy) = (37.0 / 224.0, 19.0 / 224.0);
        let src = |c: usize, x: usize, y: usize| img.pixel(x, y)[c] as f64 / 255.0;
        for &(c, oy, ox) in &[(0usize, 0usize, 0usize), (1, 100, 57), (2, 223, 223), (0, 13, 200)] {
            let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, 18.0);
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, 36.0);
            let (y0, x0) = (fy.floor() as usize, fx.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(18), (x0 + 1).min(36));
            let (dy, dx) = (fy - y0 as f64, fx - x0 as f64);
            let v = src(c, x0, y0) * (1.0 - dy) * (1.0 - dx)
                + src(c, x1, y0) * (1.0 - dy) * dx
                + src(c, x0, y1) * dy * (1.0 - dx)
                + src(c, x1, y1) * dy * dx;
            let expected = (v - p.mean[c] as f64) / p.std[c] as f64;
            assert!((t.at(0, c, oy, ox) as f64 - expected).abs() < 1e-5, "{c} {oy} {ox}");
        }
    }

    #[test]
    fn empty_image_rejected() {
        assert!(Preprocess::default().apply(&RgbImage::filled(0, 3, [0; 3])).is_err());
    }
}
