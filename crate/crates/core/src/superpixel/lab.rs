use crate::image::RgbImage;

/// D65 reference white.
const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

#[derive(Clone, Debug, PartialEq)]
pub struct LabImage {
    pub width: usize,
    pub height: usize,
    /// `(L, a, b)` per pixel, row-major.
    pub data: Vec<[f64; 3]>,
}

impl LabImage {
    pub fn at(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }
}

fn linearize(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn f(t: f64) -> f64 {
    const D: f64 = 6.0 / 29.0;
    if t > D * D * D {
        t.cbrt()
    } else {
        t / (3.0 * D * D) + 4.0 / 29.0
    }
}

/// sRGB → CIELAB under D65.
pub fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(linearize);
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    let (fx, fy, fz) = (f(x / WHITE[0]), f(y / WHITE[1]), f(z / WHITE[2]));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

pub fn rgb_to_lab(img: &RgbImage) -> LabImage {
    LabImage {
        width: img.width(),
        height: img.height(),
        data: img
            .data()
            .chunks_exact(3)
            .map(|p| srgb_to_lab([p[0], p[1], p[2]]))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_and_black() {
        let [l, a, b] = srgb_to_lab([255, 255, 255]);
        assert!(
            (l - 100.0).abs() < 0.01 && a.abs() < 0.01 && b.abs() < 0.01,
            "{l} {a} {b}"
        );
        let [l, a, b] = srgb_to_lab([0, 0, 0]);
        assert!(l.abs() < 1e-9 && a.abs() < 1e-9 && b.abs() < 1e-9);
    }

    #[test]
    fn mid_gray() {
        let [l, a, b] = srgb_to_lab([119, 119, 119]);
        assert!(a.abs() < 0.01 && b.abs() < 0.01);
        // Achromatic: L depends on relative luminance alone.
        let y = ((119.0 / 255.0 + 0.055) / 1.055f64).powf(2.4);
        let expected = 116.0 * y.cbrt() - 16.0;
        assert!((l - expected).abs() < 1e-3, "{l} vs {expected}");
        assert!((l - 50.0).abs() < 1.0);
    }
}
