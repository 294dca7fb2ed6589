//! Confusion matrices and classification metrics.
//!
//! Rows of a confusion matrix are actual classes, columns are predictions.
//! For binary tasks class index 1 is the positive class. Ratios with a zero
//! denominator are reported as 0.
//!
//! Specificity is `TN / (TN + FP)`, the fraction of negatives classified
//! correctly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::Task;
use crate::model::Model;
use crate::tensor::Real;
use crate::text::EncodedExample;

/// Metric names in reporting order.
pub const METRIC_NAMES: [&str; 8] = ["accuracy", "precision", "recall", "f1", "mcc", "specificity", "gmean1", "gmean2"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Input(format!("confusion matrix needs at least 2 classes, got {classes}")));
        }
        Ok(Self { classes, counts: vec![0; classes * classes] })
    }

    /// Builds a matrix from row-major counts (`rows[actual][predicted]`).
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let mut cm = Self::new(rows.len())?;
        for (a, row) in rows.iter().enumerate() {
            if row.len() != rows.len() {
                return Err(Error::Input("confusion matrix must be square".into()));
            }
            cm.counts[a * cm.classes..(a + 1) * cm.classes].copy_from_slice(row);
        }
        Ok(cm)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.classes + predicted]
    }

    pub fn record(&mut self, actual: usize, predicted: usize) -> Result<()> {
        if actual >= self.classes || predicted >= self.classes {
            return Err(Error::Input(format!(
                "class index ({actual}, {predicted}) out of range for {} classes",
                self.classes
            )));
        }
        self.counts[actual * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|k| self.get(k, k)).sum()
    }

    /// Adds another matrix of the same size.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::Input("cannot merge confusion matrices of different sizes".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// One-vs-rest counts for class `k`.
    pub fn one_vs_rest(&self, k: usize) -> BinaryCounts {
        let tp = self.get(k, k);
        let row: u64 = (0..self.classes).map(|p| self.get(k, p)).sum();
        let col: u64 = (0..self.classes).map(|a| self.get(a, k)).sum();
        let fn_ = row - tp;
        let fp = col - tp;
        BinaryCounts { tp, fp, fn_, tn: self.total() - tp - fp - fn_ }
    }

    fn row_sums(&self) -> Vec<u64> {
        (0..self.classes).map(|a| (0..self.classes).map(|p| self.get(a, p)).sum()).collect()
    }

    fn col_sums(&self) -> Vec<u64> {
        (0..self.classes).map(|p| (0..self.classes).map(|a| self.get(a, p)).sum()).collect()
    }
}

/// Builds a confusion matrix from paired predictions and actual labels.
pub fn confusion(predictions: &[usize], actuals: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if predictions.len() != actuals.len() {
        return Err(Error::Input(format!(
            "{} predictions but {} actual labels",
            predictions.len(),
            actuals.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Input("no predictions to evaluate".into()));
    }
    let mut cm = ConfusionMatrix::new(classes)?;
    for (&p, &a) in predictions.iter().zip(actuals) {
        cm.record(a, p)?;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl BinaryCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp as f64, (self.tp + self.fp) as f64)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp as f64, (self.tp + self.fn_) as f64)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.tn as f64, (self.tn + self.fp) as f64)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        ratio(2.0 * p * r, p + r)
    }

    pub fn accuracy(&self) -> f64 {
        ratio((self.tp + self.tn) as f64, (self.tp + self.tn + self.fp + self.fn_) as f64)
    }

    pub fn mcc(&self) -> f64 {
        let (tp, fp, fn_, tn) = (self.tp as f64, self.fp as f64, self.fn_ as f64, self.tn as f64);
        let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
        ratio(tp * tn - fp * fn_, den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Two-class task; no averaging applies.
    Binary,
    /// Unweighted mean of one-vs-rest per-class metrics.
    #[default]
    Macro,
    /// Metrics of one-vs-rest counts pooled over classes.
    Micro,
}

impl FromStr for Averaging {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "macro" => Ok(Self::Macro),
            "micro" => Ok(Self::Micro),
            "binary" => Ok(Self::Binary),
            _ => Err(Error::Config(format!("unknown averaging {s:?} (expected macro or micro)"))),
        }
    }
}

impl fmt::Display for Averaging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Binary => "binary",
            Self::Macro => "macro",
            Self::Micro => "micro",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
    pub specificity: f64,
    pub gmean1: f64,
    pub gmean2: f64,
    pub averaging: Averaging,
}

impl MetricsReport {
    /// Values in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [f64; 8] {
        [self.accuracy, self.precision, self.recall, self.f1, self.mcc, self.specificity, self.gmean1, self.gmean2]
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, f64)> {
        METRIC_NAMES.into_iter().zip(self.values())
    }

    fn from_parts(accuracy: f64, precision: f64, recall: f64, f1: f64, mcc: f64, specificity: f64, averaging: Averaging) -> Self {
        Self {
            accuracy,
            precision,
            recall,
            f1,
            mcc,
            specificity,
            gmean1: (precision * recall).sqrt(),
            gmean2: (specificity * recall).sqrt(),
            averaging,
        }
    }
}

pub fn binary_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    if cm.classes() != 2 {
        return Err(Error::Input(format!("binary metrics need a 2x2 matrix, got {0}x{0}", cm.classes())));
    }
    if cm.total() == 0 {
        return Err(Error::Input("empty confusion matrix".into()));
    }
    let c = cm.one_vs_rest(1);
    Ok(MetricsReport::from_parts(c.accuracy(), c.precision(), c.recall(), c.f1(), c.mcc(), c.specificity(), Averaging::Binary))
}

/// Generalized Matthews correlation over a `c × c` matrix.
pub fn multiclass_mcc(cm: &ConfusionMatrix) -> f64 {
    let s = cm.total() as f64;
    let correct = cm.trace() as f64;
    let t = cm.row_sums();
    let p = cm.col_sums();
    let pt: f64 = p.iter().zip(&t).map(|(&pk, &tk)| pk as f64 * tk as f64).sum();
    let pp: f64 = p.iter().map(|&x| (x as f64).powi(2)).sum();
    let tt: f64 = t.iter().map(|&x| (x as f64).powi(2)).sum();
    ratio(correct * s - pt, ((s * s - pp) * (s * s - tt)).sqrt())
}

pub fn multiclass_metrics(cm: &ConfusionMatrix, averaging: Averaging) -> Result<MetricsReport> {
    if cm.total() == 0 {
        return Err(Error::Input("empty confusion matrix".into()));
    }
    let k = cm.classes();
    let accuracy = cm.trace() as f64 / cm.total() as f64;
    let mcc = multiclass_mcc(cm);
    let per_class: Vec<BinaryCounts> = (0..k).map(|c| cm.one_vs_rest(c)).collect();
    match averaging {
        Averaging::Micro => {
            let pooled = per_class.iter().fold(BinaryCounts { tp: 0, fp: 0, fn_: 0, tn: 0 }, |acc, c| BinaryCounts {
                tp: acc.tp + c.tp,
                fp: acc.fp + c.fp,
                fn_: acc.fn_ + c.fn_,
                tn: acc.tn + c.tn,
            });
            Ok(MetricsReport::from_parts(
                accuracy,
                pooled.precision(),
                pooled.recall(),
                pooled.f1(),
                mcc,
                pooled.specificity(),
                Averaging::Micro,
            ))
        }
        Averaging::Macro | Averaging::Binary => {
            let mean = |f: fn(&BinaryCounts) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
            Ok(MetricsReport::from_parts(
                accuracy,
                mean(BinaryCounts::precision),
                mean(BinaryCounts::recall),
                mean(BinaryCounts::f1),
                mcc,
                mean(BinaryCounts::specificity),
                Averaging::Macro,
            ))
        }
    }
}

/// Binary metrics for two classes, `averaging` otherwise.
pub fn metrics(cm: &ConfusionMatrix, averaging: Averaging) -> Result<MetricsReport> {
    if cm.classes() == 2 {
        binary_metrics(cm)
    } else {
        multiclass_metrics(cm, averaging)
    }
}

/// Predicted class: `p ≥ 0.5` is positive for a sigmoid head; argmax with
/// ties to the lowest index for softmax.
pub fn decide<T: Real>(task: Task, probabilities: &[T]) -> usize {
    match task {
        Task::Binary => usize::from(probabilities[0] >= T::from_f64(0.5)),
        Task::Multiclass => {
            let mut best = 0;
            for (i, &p) in probabilities.iter().enumerate().skip(1) {
                if p > probabilities[best] {
                    best = i;
                }
            }
            best
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<usize>,
    /// Per-example class probabilities (as `f64`).
    pub probabilities: Vec<Vec<f64>>,
}

/// Eval-mode predictions and metrics over `examples`.
pub fn evaluate<T: Real>(model: &Model<T>, examples: &[EncodedExample<T>], averaging: Averaging) -> Result<Evaluation> {
    let mut predictions = Vec::with_capacity(examples.len());
    let mut probabilities = Vec::with_capacity(examples.len());
    for ex in examples {
        let probs = model.predict(&ex.input)?;
        predictions.push(decide(model.task(), probs.data()));
        probabilities.push(probs.data().iter().map(|p| p.as_f64()).collect());
    }
    let actuals: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let cm = confusion(&predictions, &actuals, model.config.num_classes)?;
    Ok(Evaluation { report: metrics(&cm, averaging)?, confusion: cm, predictions, probabilities })
}
