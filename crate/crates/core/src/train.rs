//! Head-only fine-tuning: minibatch SGD on binary cross entropy over frozen features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{head_names, ModelGraph};
use crate::ops::sigmoid;
use crate::tensor::Tensor;

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` before taking logs.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.0005,
            epochs: 40,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // lr = 0 is allowed: it is a useful no-op run.
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.lr
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Feature vectors with binary labels (1 = fire).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledFeatureSet {
    dim: usize,
    features: Vec<f32>,
    labels: Vec<u8>,
}

impl LabeledFeatureSet {
    pub fn new(features: Vec<Vec<f32>>, labels: Vec<u8>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::invalid(
                "feature set",
                format!("{} feature vectors for {} labels", features.len(), labels.len()),
            ));
        }
        let dim = features.first().map_or(0, Vec::len);
        if features.iter().any(|f| f.len() != dim) {
            return Err(Error::invalid("feature set", "feature vectors differ in length"));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::invalid("feature set", format!("label {bad} is not 0 or 1")));
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature set", "non-finite feature value"));
        }
        Ok(Self {
            dim,
            features: features.concat(),
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn feature(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

/// Pooled features of each frame (`1 × 3 × H × W`), computed in parallel.
pub fn extract_features(model: &ModelGraph, frames: &[Tensor], labels: Vec<u8>) -> Result<LabeledFeatureSet> {
    let feats = frames
        .par_iter()
        .map(|f| model.forward_features(f).map(Tensor::into_data))
        .collect::<Result<Vec<_>>>()?;
    LabeledFeatureSet::new(feats, labels)
}

pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Gradient of [`bce_loss`]`(sigmoid(w·x + b), y)` with respect to `w` and `b`.
pub fn head_gradient(x: &[f64], w: &[f64], b: f64, y: f64) -> (Vec<f64>, f64) {
    let z = dot(w, x) + b;
    let d = sigmoid(z) - y;
    (x.iter().map(|xi| d * xi).collect(), d)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Single-logit linear head held in `f64` while training.
#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Head {
    pub fn zeros(dim: usize) -> Self {
        Self {
            w: vec![0.0; dim],
            b: 0.0,
        }
    }

    pub fn from_f32(w: &[f32], b: f32) -> Self {
        Self {
            w: w.iter().map(|&v| v as f64).collect(),
            b: b as f64,
        }
    }

    pub fn logit(&self, x: &[f32]) -> f64 {
        self.w.iter().zip(x).map(|(w, &x)| w * x as f64).sum::<f64>() + self.b
    }

    /// Mean loss and accuracy (fire iff probability ≥ 0.5) over the whole set.
    pub fn evaluate(&self, data: &LabeledFeatureSet) -> (f64, f64) {
        let mut loss = 0.0;
        let mut correct = 0usize;
        for i in 0..data.len() {
            let z = self.logit(data.feature(i));
            let y = data.label(i);
            loss += bce_loss(sigmoid(z), y as f64);
            if (z >= 0.0) == (y == 1) {
                correct += 1;
            }
        }
        let n = data.len().max(1) as f64;
        (loss / n, correct as f64 / n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Stepwise trainer. Each epoch visits the data in an order drawn from the
/// seeded generator and applies one update per minibatch using the mean gradient.
pub struct SgdTrainer<'a> {
    head: Head,
    cfg: TrainConfig,
    data: &'a LabeledFeatureSet,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    epoch: usize,
}

impl<'a> SgdTrainer<'a> {
    pub fn new(head: Head, data: &'a LabeledFeatureSet, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(Error::EmptyDataset("no training samples".into()));
        }
        if head.w.len() != data.dim() {
            return Err(Error::shape(
                "train",
                "feature width",
                format!("head has {} weights, features have {}", head.w.len(), data.dim()),
            ));
        }
        Ok(Self {
            head,
            cfg,
            data,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            order: (0..data.len()).collect(),
            epoch: 0,
        })
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn into_head(self) -> Head {
        self.head
    }

    /// Runs one epoch, calling `on_step` after every update, and returns the
    /// full-set loss and accuracy at its end.
    pub fn run_epoch(&mut self, mut on_step: impl FnMut(&Head)) -> EpochStats {
        self.order.shuffle(&mut self.rng);
        let dim = self.data.dim();
        let mut gw = vec![0.0f64; dim];
        for batch in self.order.chunks(self.cfg.batch_size) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for &i in batch {
                let x = self.data.feature(i);
                let d = sigmoid(self.head.logit(x)) - self.data.label(i) as f64;
                for (g, &xi) in gw.iter_mut().zip(x) {
                    *g += d * xi as f64;
                }
                gb += d;
            }
            let scale = self.cfg.lr / batch.len() as f64;
            for (w, g) in self.head.w.iter_mut().zip(&gw) {
                *w -= scale * g;
            }
            self.head.b -= scale * gb;
            on_step(&self.head);
        }
        self.epoch += 1;
        let (loss, accuracy) = self.head.evaluate(self.data);
        EpochStats {
            epoch: self.epoch,
            loss,
            accuracy,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub head: Head,
    pub curve: Vec<EpochStats>,
}

/// Trains `head` on raw features for `cfg.epochs` epochs.
pub fn train_head(data: &LabeledFeatureSet, head: Head, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut t = SgdTrainer::new(head, data, *cfg)?;
    let curve = (0..cfg.epochs).map(|_| t.run_epoch(|_| {})).collect();
    Ok(TrainOutcome {
        head: t.into_head(),
        curve,
    })
}

/// Fine-tunes the classifier of `model`; every other tensor is shared unchanged.
pub fn finetune_head(
    model: &ModelGraph,
    data: &LabeledFeatureSet,
    cfg: &TrainConfig,
) -> Result<(ModelGraph, Vec<EpochStats>)> {
    let (w, b) = model.head()?;
    let out = train_head(data, Head::from_f32(&w, b), cfg)?;
    let (wn, bn) = head_names();
    let store = model.weights().with_replaced([
        (
            wn.to_string(),
            Tensor::new([1, w.len(), 1, 1], out.head.w.iter().map(|&v| v as f32).collect())?,
        ),
        (bn.to_string(), Tensor::vector(vec![out.head.b as f32])),
    ]);
    Ok((model.with_weights(store)?, out.curve))
}

/// `epoch,loss,accuracy` rows with a header line.
pub fn curve_csv(curve: &[EpochStats]) -> String {
    let mut s = String::from("epoch,loss,accuracy\n");
    for e in curve {
        s.push_str(&format!("{},{:.6},{:.6}\n", e.epoch, e.loss, e.accuracy));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn bce_examples() {
        assert!((bce_loss(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(bce_loss(1.0 - BCE_EPS, 1.0) < 1e-6);
        assert!(bce_loss(0.0, 1.0).is_finite());
        assert!(bce_loss(1.0, 0.0).is_finite());
    }

    #[test]
    fn gradient_examples() {
        // p = y exactly cannot happen for finite logits with y in {0,1}; use a
        // fractional target to hit it.
        let (gw, gb) = head_gradient(&[1.0, 2.0], &[0.0, 0.0], 0.0, 0.5);
        assert_eq!((gw, gb), (vec![0.0, 0.0], 0.0));
        let (gw, gb) = head_gradient(&[1.0; 4], &[0.0; 4], 0.0, 0.0);
        assert_eq!(gw, vec![0.5; 4]);
        assert_eq!(gb, 0.5);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-3;
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let dim = rng.gen_range(1..8);
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b = rng.gen_range(-1.0..1.0);
            let y = rng.gen_range(0..2) as f64;
            let loss = |w: &[f64], b: f64| bce_loss(sigmoid(dot(w, &x) + b), y);
            let (gw, gb) = head_gradient(&x, &w, b, y);
            let mut rel = |analytic: f64, numeric: f64| {
                let r = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
                worst = worst.max(r);
            };
            for j in 0..dim {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[j] += h;
                wm[j] -= h;
                rel(gw[j], (loss(&wp, b) - loss(&wm, b)) / (2.0 * h));
            }
            rel(gb, (loss(&w, b + h) - loss(&w, b - h)) / (2.0 * h));
        }
        assert!(worst <= 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig {
            lr: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            epochs: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn feature_set_validation() {
        assert!(LabeledFeatureSet::new(vec![vec![1.0]], vec![2]).is_err());
        assert!(LabeledFeatureSet::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0, 1]).is_err());
        assert!(LabeledFeatureSet::new(vec![vec![f32::NAN]], vec![0]).is_err());
        let empty = LabeledFeatureSet::new(vec![], vec![]).unwrap();
        assert!(matches!(
            train_head(&empty, Head::zeros(0), &TrainConfig::default()),
            Err(Error::EmptyDataset(_))
        ));
    }
}
