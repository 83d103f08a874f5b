//! Confusion counts and the derived classification figures.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    /// Tallies `(predicted_fire, actually_fire)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = Self::default();
        for (pred, truth) in pairs {
            c.record(pred, truth);
        }
        c
    }

    pub fn record(&mut self, predicted_fire: bool, actually_fire: bool) {
        match (predicted_fire, actually_fire) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Derived figures; `None` marks a metric whose denominator is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub counts: ConfusionCounts,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub precision: Option<f64>,
    pub f_score: Option<f64>,
    pub accuracy: Option<f64>,
    /// Parameter count in millions.
    pub params_millions: Option<f64>,
    pub ac_ratio: Option<f64>,
    pub fps: Option<f64>,
}

impl MetricsReport {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let c = counts;
        let tpr = ratio(c.tp, c.tp + c.fn_);
        let precision = ratio(c.tp, c.tp + c.fp);
        let f_score = match (precision, tpr) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        Self {
            counts,
            tpr,
            fpr: ratio(c.fp, c.fp + c.tn),
            precision,
            f_score,
            accuracy: ratio(c.tp + c.tn, c.total()),
            params_millions: None,
            ac_ratio: None,
            fps: None,
        }
    }

    pub fn with_params(mut self, params: usize) -> Self {
        let c = params as f64 / 1e6;
        self.params_millions = Some(c);
        self.ac_ratio = self.accuracy.and_then(|a| accuracy_complexity_ratio(a * 100.0, c).ok());
        self
    }

    pub fn with_fps(mut self, fps: f64) -> Self {
        self.fps = Some(fps);
        self
    }

    /// `(metric, value)` pairs in report order, with undefined values as `n/a`.
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        let c = &self.counts;
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
        let mut rows = vec![
            ("tp", c.tp.to_string()),
            ("fp", c.fp.to_string()),
            ("tn", c.tn.to_string()),
            ("fn", c.fn_.to_string()),
            ("tpr", opt(self.tpr)),
            ("fpr", opt(self.fpr)),
            ("precision", opt(self.precision)),
            ("f_score", opt(self.f_score)),
            ("accuracy", opt(self.accuracy)),
        ];
        if self.params_millions.is_some() {
            rows.push(("params_millions", opt(self.params_millions)));
            rows.push(("ac_ratio", opt(self.ac_ratio)));
        }
        if self.fps.is_some() {
            rows.push(("fps", opt(self.fps)));
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        for (k, v) in self.rows() {
            s.push_str(&format!("{k},{v}\n"));
        }
        s
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.rows() {
            writeln!(f, "{k:>16}  {v}")?;
        }
        Ok(())
    }
}

/// Accuracy in percent per million parameters.
pub fn accuracy_complexity_ratio(accuracy_percent: f64, params_millions: f64) -> Result<f64> {
    if params_millions.is_nan() || params_millions <= 0.0 {
        return Err(Error::invalid(
            "accuracy_complexity_ratio",
            format!("parameter count must be positive, got {params_millions}"),
        ));
    }
    Ok(accuracy_percent / params_millions)
}
