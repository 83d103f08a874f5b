//! Seeded fixtures for tests, benchmarks and smoke runs.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::image::{save_ppm, RgbImage};
use crate::pipeline::DatasetLayout;
use crate::train::LabeledFeatureSet;

/// Two 2-D clusters centred on `(2, 2)` (fire) and `(−2, −2)` with uniform
/// jitter of ±1.5 per axis, so the line `x + y = 0` separates them with margin.
pub fn separable_features(per_class: usize, seed: u64) -> LabeledFeatureSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(2 * per_class);
    let mut ys = Vec::with_capacity(2 * per_class);
    for i in 0..2 * per_class {
        let label = (i % 2) as u8;
        let c = if label == 1 { 2.0 } else { -2.0 };
        xs.push(vec![c + rng.gen_range(-1.5f32..1.5), c + rng.gen_range(-1.5f32..1.5)]);
        ys.push(label);
    }
    LabeledFeatureSet::new(xs, ys).expect("fixture is well formed")
}

/// A warm flame-like blob on a dark scene, or a cool outdoor-like scene.
pub fn synthetic_frame(rng: &mut impl Rng, fire: bool, width: usize, height: usize) -> RgbImage {
    let cx = rng.gen_range(0.3..0.7) * width as f64;
    let cy = rng.gen_range(0.4..0.8) * height as f64;
    let r = rng.gen_range(0.15..0.3) * width.min(height) as f64;
    let noise: Vec<i16> = (0..width * height).map(|_| rng.gen_range(-12..=12)).collect();
    RgbImage::from_fn(width, height, |x, y| {
        let n = noise[y * width + x];
        let px = |v: f64| (v + n as f64).clamp(0.0, 255.0) as u8;
        let t = y as f64 / height.max(1) as f64;
        if fire {
            let d = ((x as f64 - cx).powi(2) + ((y as f64 - cy) * 0.7).powi(2)).sqrt() / r;
            if d < 1.0 {
                [px(255.0), px(230.0 - 150.0 * d), px(120.0 * (1.0 - d))]
            } else {
                [px(40.0 + 20.0 * t), px(25.0), px(20.0)]
            }
        } else {
            let sky = [110.0 + 60.0 * (1.0 - t), 150.0 + 40.0 * (1.0 - t), 210.0];
            let grass = [50.0, 120.0 + 40.0 * t, 60.0];
            let c = if t < 0.55 { sky } else { grass };
            [px(c[0]), px(c[1]), px(c[2])]
        }
    })
}

/// `n` frames alternating fire and no fire, starting with fire.
pub fn synthetic_frames(n: usize, size: usize, seed: u64) -> Vec<RgbImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| synthetic_frame(&mut rng, i % 2 == 0, size, size))
        .collect()
}

/// Writes `per_class` frames into each of `root/fire` and `root/nofire`.
pub fn write_synthetic_dataset(root: &Path, per_class: usize, size: usize, seed: u64) -> Result<DatasetLayout> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (sub, fire) in [(DatasetLayout::FIRE_DIR, true), (DatasetLayout::NO_FIRE_DIR, false)] {
        let dir = root.join(sub);
        std::fs::create_dir_all(&dir)?;
        for i in 0..per_class {
            save_ppm(
                dir.join(format!("frame_{i:03}.ppm")),
                &synthetic_frame(&mut rng, fire, size, size),
            )?;
        }
    }
    DatasetLayout::open(root)
}
