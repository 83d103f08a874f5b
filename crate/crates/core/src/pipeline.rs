//! Frame classification, dataset evaluation and throughput measurement.

use std::cmp::Ordering;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{load_ppm, RgbImage};
use crate::metrics::{ConfusionCounts, MetricsReport};
use crate::model::ModelGraph;
use crate::ops::sigmoid;
use crate::preprocess::Preprocess;
use crate::superpixel::{localize_fire, SlicParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub logit: f32,
    pub probability: f64,
    pub fire: bool,
}

/// Logit below which a frame is not fire at `threshold`.
///
/// `sigmoid(z) ≥ t` is decided as `z ≥ ln(t / (1 − t))`, which avoids
/// saturation of the probability for large logits. `t ≥ 1` never fires and
/// `t ≤ 0` always does.
pub fn logit_threshold(threshold: f64) -> f64 {
    if threshold >= 1.0 {
        f64::INFINITY
    } else if threshold <= 0.0 {
        f64::NEG_INFINITY
    } else {
        (threshold / (1.0 - threshold)).ln()
    }
}

pub fn fire_decision(logit: f32, threshold: f64) -> Prediction {
    let z = logit as f64;
    let fire = if threshold >= 1.0 {
        false
    } else {
        threshold <= 0.0 || z >= logit_threshold(threshold)
    };
    Prediction {
        logit,
        probability: sigmoid(z),
        fire,
    }
}

fn preprocess_for(model: &ModelGraph) -> Preprocess {
    Preprocess {
        size: model.input_size(),
        ..Preprocess::default()
    }
}

pub fn classify_frame(model: &ModelGraph, image: &RgbImage, threshold: f64) -> Result<Prediction> {
    let x = preprocess_for(model).apply(image)?;
    Ok(fire_decision(model.forward(&x)?[0], threshold))
}

/// Orders names so that digit runs compare numerically: `frame2` before `frame10`.
fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut a, mut b) = (a.as_bytes(), b.as_bytes());
    loop {
        match (a.first(), b.first()) {
            (None, None) => return Ordering::Equal,
            (None, _) => return Ordering::Less,
            (_, None) => return Ordering::Greater,
            (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                let da = a.iter().take_while(|c| c.is_ascii_digit()).count();
                let db = b.iter().take_while(|c| c.is_ascii_digit()).count();
                let na = std::str::from_utf8(&a[..da]).unwrap().trim_start_matches('0');
                let nb = std::str::from_utf8(&b[..db]).unwrap().trim_start_matches('0');
                let o = na.len().cmp(&nb.len()).then(na.cmp(nb)).then(da.cmp(&db));
                if o != Ordering::Equal {
                    return o;
                }
                (a, b) = (&a[da..], &b[db..]);
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return x.cmp(y);
                }
                (a, b) = (&a[1..], &b[1..]);
            }
        }
    }
}

fn is_ppm(p: &Path) -> bool {
    p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm"))
}

/// PPM files directly inside `dir`, in natural name order.
pub fn list_ppm(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| is_ppm(p))
        .collect();
    files.sort_by(|a, b| natural_cmp(&a.to_string_lossy(), &b.to_string_lossy()));
    Ok(files)
}

/// A single image, or a directory of numbered frames treated as a video.
pub fn frame_sources(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let frames = list_ppm(path)?;
        if frames.is_empty() {
            return Err(Error::EmptyDataset(format!("no .ppm frames in {}", path.display())));
        }
        Ok(frames)
    } else {
        // Let the loader report a missing or unreadable file.
        Ok(vec![path.to_path_buf()])
    }
}

/// `fire/` and `nofire/` subdirectories of PPM images; the label is the directory.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetLayout {
    pub root: PathBuf,
    /// `(path, is_fire)`.
    pub items: Vec<(PathBuf, bool)>,
}

impl DatasetLayout {
    pub const FIRE_DIR: &'static str = "fire";
    pub const NO_FIRE_DIR: &'static str = "nofire";

    /// Scans `root`. A missing class directory counts as an empty class.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        if !root.is_dir() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("dataset root {} is not a directory", root.display()),
            )));
        }
        let mut items = Vec::new();
        for (sub, fire) in [(Self::FIRE_DIR, true), (Self::NO_FIRE_DIR, false)] {
            let dir = root.join(sub);
            if dir.is_dir() {
                items.extend(list_ppm(&dir)?.into_iter().map(|p| (p, fire)));
            }
        }
        if items.is_empty() {
            return Err(Error::EmptyDataset(format!(
                "no .ppm images under {}/{{fire,nofire}}",
                root.display()
            )));
        }
        Ok(Self { root, items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub report: MetricsReport,
    /// `(path, is_fire, prediction)` in dataset order.
    pub predictions: Vec<(PathBuf, bool, Prediction)>,
}

/// Classifies every image of the dataset in parallel and tallies the confusion counts.
pub fn evaluate(model: &ModelGraph, data: &DatasetLayout, threshold: f64) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::EmptyDataset(data.root.display().to_string()));
    }
    let predictions = data
        .items
        .par_iter()
        .map(|(path, fire)| {
            let img = load_ppm(path)?;
            Ok((path.clone(), *fire, classify_frame(model, &img, threshold)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let counts = ConfusionCounts::from_pairs(predictions.iter().map(|(_, t, p)| (p.fire, *t)));
    Ok(Evaluation {
        report: MetricsReport::from_counts(counts).with_params(model.param_count()),
        predictions,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BenchMode {
    FullFrame,
    /// SLIC plus classification of every superpixel, per frame.
    Superpixel(SlicParams),
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FullFrame => f.write_str("fullframe"),
            Self::Superpixel(p) => write!(f, "superpixel (K={})", p.k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchResult {
    pub mode: BenchMode,
    pub frames: usize,
    pub seconds: f64,
    pub fps: f64,
}

/// Single-stream throughput at batch size 1, cycling through `images`.
///
/// `warmup` frames run first and are not timed.
pub fn bench(
    model: &ModelGraph,
    mode: BenchMode,
    images: &[RgbImage],
    frames: usize,
    warmup: usize,
) -> Result<BenchResult> {
    if frames == 0 {
        return Err(Error::invalid("bench", "frame count must be positive"));
    }
    if images.is_empty() {
        return Err(Error::invalid("bench", "no input images"));
    }
    let run = |img: &RgbImage| -> Result<()> {
        match mode {
            BenchMode::FullFrame => classify_frame(model, img, 0.5).map(|_| ()),
            BenchMode::Superpixel(p) => localize_fire(model, img, &p, 0.5).map(|_| ()),
        }
    };
    for i in 0..warmup {
        run(&images[i % images.len()])?;
    }
    let start = Instant::now();
    for i in 0..frames {
        run(&images[i % images.len()])?;
    }
    let seconds = start.elapsed().as_secs_f64().max(1e-9);
    Ok(BenchResult {
        mode,
        frames,
        seconds,
        fps: frames as f64 / seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_boundaries() {
        assert!(fire_decision(0.0, 0.5).fire);
        assert!(!fire_decision(-1e-6, 0.5).fire);
        assert!(!fire_decision(80.0, 1.0).fire);
        assert!(fire_decision(-80.0, 0.0).fire);
        assert!(fire_decision(f32::NEG_INFINITY, 0.0).fire);
        let p = fire_decision(1.5, 0.5);
        assert!((p.probability - 1.0 / (1.0 + (-1.5f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn decision_agrees_with_probability() {
        for &t in &[0.1, 0.3, 0.5, 0.77, 0.9] {
            for i in -40..=40 {
                let z = i as f32 * 0.25;
                let p = fire_decision(z, t);
                if (p.probability - t).abs() > 1e-9 {
                    assert_eq!(p.fire, p.probability >= t, "z={z} t={t}");
                }
            }
        }
    }

    #[test]
    fn natural_order() {
        let mut v = vec!["f10.ppm", "f2.ppm", "f1.ppm", "f02.ppm", "a.ppm"];
        v.sort_by(|a, b| natural_cmp(a, b));
        assert_eq!(v, vec!["a.ppm", "f1.ppm", "f2.ppm", "f02.ppm", "f10.ppm"]);
    }
}
