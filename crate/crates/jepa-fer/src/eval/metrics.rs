//! Confusion matrices and recall-based metrics.
//!
//! UAR is the unweighted mean of per-class recalls; WAR weights each recall
//! by class frequency, which algebraically equals plain accuracy. Classes
//! with zero ground-truth support are excluded from UAR's mean and reported.

use crate::error::{Error, Result};
use serde::Serialize;

/// K×K counts; rows are ground truth, columns are predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let k = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![0; k * k],
        }
    }

    pub fn from_counts(classes: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes.len() * classes.len() {
            return Err(Error::Dimension {
                op: "confusion",
                lhs: vec![classes.len(), classes.len()],
                rhs: vec![counts.len()],
            });
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn add(&mut self, truth: usize, pred: usize) {
        let k = self.k();
        self.counts[truth * k + pred] += 1;
    }

    pub fn count(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k() + pred]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Ground-truth occurrences of class `c`.
    pub fn support(&self, c: usize) -> u64 {
        let k = self.k();
        self.counts[c * k..(c + 1) * k].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        let k = self.k();
        (0..k).map(|c| self.counts[c * k + c]).sum()
    }

    /// Merge another matrix over the same classes by summation.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.classes != other.classes {
            return Err(Error::protocol("merging confusion matrices over different classes"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn recall(&self, c: usize) -> Option<f64> {
        let support = self.support(c);
        if support == 0 {
            return None;
        }
        Some(self.count(c, c) as f64 / support as f64)
    }
}

/// UAR plus the classes that had zero support and were excluded.
#[derive(Debug, Clone)]
pub struct UarResult {
    pub value: f64,
    pub excluded: Vec<String>,
}

/// Mean per-class recall over supported classes.
pub fn uar(cm: &ConfusionMatrix) -> Result<UarResult> {
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut excluded = Vec::new();
    for c in 0..cm.k() {
        match cm.recall(c) {
            Some(r) => {
                sum += r;
                n += 1;
            }
            None => excluded.push(cm.classes[c].clone()),
        }
    }
    if n == 0 {
        return Err(Error::protocol("uar over an empty confusion matrix"));
    }
    if !excluded.is_empty() {
        log::warn!("uar: excluding zero-support classes {excluded:?}");
    }
    Ok(UarResult {
        value: sum / n as f64,
        excluded,
    })
}

/// Class-frequency-weighted recall: sum over classes of
/// (|D_c| / |D|) * recall_c.
pub fn war(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::protocol("war over an empty confusion matrix"));
    }
    let mut acc = 0.0;
    for c in 0..cm.k() {
        if let Some(r) = cm.recall(c) {
            acc += (cm.support(c) as f64 / total as f64) * r;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldMetrics {
    pub uar: f64,
    pub war: f64,
}

/// The aggregated result of an evaluation run, serialized as metrics.json.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub voting: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    pub classes: Vec<String>,
    pub folds: Vec<FoldMetrics>,
    pub mean_uar: f64,
    pub mean_war: f64,
    pub std_war: f64,
    pub dropped: usize,
}

impl MetricsReport {
    pub fn from_folds(
        dataset: String,
        voting: String,
        mode: Option<String>,
        classes: Vec<String>,
        folds: Vec<FoldMetrics>,
        dropped: usize,
    ) -> Self {
        let n = folds.len().max(1) as f64;
        let mean_uar = folds.iter().map(|f| f.uar).sum::<f64>() / n;
        let mean_war = folds.iter().map(|f| f.war).sum::<f64>() / n;
        // population standard deviation across folds
        let var = folds.iter().map(|f| (f.war - mean_war).powi(2)).sum::<f64>() / n;
        MetricsReport {
            dataset,
            voting,
            mode,
            classes,
            folds,
            mean_uar,
            mean_war,
            std_war: var.sqrt(),
            dropped,
        }
    }
}
