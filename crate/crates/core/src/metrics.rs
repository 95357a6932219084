//! Confusion matrix and the classification metric battery.
//!
//! Per-class values are one-vs-rest. Aggregates are unweighted (macro)
//! means over classes. The aggregate F-score is the harmonic mean of macro
//! precision and macro recall; the mean of per-class F1 values is reported
//! separately as `mean_class_f1`. Any 0/0 ratio is reported as 0 and listed
//! in the class's `undefined` flags.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference values for the full method on the 30-class aerial benchmark.
/// Used to annotate reports only; desk-scale runs are never compared to them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValues {
    pub accuracy_pct: f64,
    pub sensitivity_pct: f64,
    pub specificity_pct: f64,
    pub rmse: f64,
    pub mae: f64,
    pub precision_pct: f64,
    pub recall_pct: f64,
    pub f_score_pct: f64,
}

pub const PUBLISHED_REFERENCE: ReferenceValues = ReferenceValues {
    accuracy_pct: 97.0,
    sensitivity_pct: 95.0,
    specificity_pct: 93.0,
    rmse: 0.8,
    mae: 0.9,
    precision_pct: 89.1,
    recall_pct: 94.03,
    f_score_pct: 92.61,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|k| self.counts[k][k]).sum()
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::usage(format!(
            "label vectors differ in length ({} vs {})",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::usage("confusion matrix needs at least one sample"));
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (i, (&t, &p)) in truth.iter().zip(predicted).enumerate() {
        if t >= n_classes || p >= n_classes {
            return Err(Error::usage(format!(
                "sample {i}: label pair ({t}, {p}) outside [0, {n_classes})"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Names of metrics whose ratio was 0/0 for this class.
    pub undefined: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub samples: u64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub mean_class_f1: f64,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    pub per_class: Vec<ClassMetrics>,
    #[serde(rename = "paper_reference")]
    pub published_reference: ReferenceValues,
}

fn ratio(num: u64, den: u64, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Full report from a confusion matrix, plus RMSE/MAE of the predicted
/// distributions against one-hot truth when `probs` is given.
pub fn derive_metrics(cm: &ConfusionMatrix, probs: Option<&[Vec<f64>]>, truth: &[usize]) -> Result<MetricsReport> {
    let c = cm.n_classes();
    let total = cm.total();
    if c == 0 || total == 0 {
        return Err(Error::usage("confusion matrix is empty"));
    }
    if cm.counts.iter().any(|r| r.len() != c) {
        return Err(Error::usage("confusion matrix is not square"));
    }

    let mut per_class = Vec::with_capacity(c);
    for k in 0..c {
        let tp = cm.counts[k][k];
        let fn_: u64 = cm.counts[k].iter().sum::<u64>() - tp;
        let fp: u64 = (0..c).map(|t| cm.counts[t][k]).sum::<u64>() - tp;
        let tn = total - tp - fn_ - fp;
        let mut undefined = Vec::new();
        let sensitivity = ratio(tp, tp + fn_, "sensitivity", &mut undefined);
        let specificity = ratio(tn, tn + fp, "specificity", &mut undefined);
        let precision = ratio(tp, tp + fp, "precision", &mut undefined);
        let f1 = if 2 * tp + fp + fn_ == 0 {
            undefined.push("f1".to_string());
            0.0
        } else {
            harmonic(precision, sensitivity)
        };
        per_class.push(ClassMetrics {
            class: k,
            tp,
            fp,
            fn_,
            tn,
            sensitivity,
            specificity,
            precision,
            recall: sensitivity,
            f1,
            undefined,
        });
    }

    let macro_avg = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / c as f64;
    let sensitivity = macro_avg(|m| m.sensitivity);
    let specificity = macro_avg(|m| m.specificity);
    let precision = macro_avg(|m| m.precision);
    let recall = macro_avg(|m| m.recall);
    let mean_class_f1 = macro_avg(|m| m.f1);

    let (rmse, mae) = match probs {
        None => (None, None),
        Some(rows) => {
            if rows.len() != truth.len() {
                return Err(Error::usage(format!(
                    "{} probability rows for {} labels",
                    rows.len(),
                    truth.len()
                )));
            }
            let mut sq = 0.0;
            let mut abs = 0.0;
            for (i, (row, &t)) in rows.iter().zip(truth).enumerate() {
                if row.len() != c || t >= c {
                    return Err(Error::usage(format!("probability row {i} has wrong width or label")));
                }
                let sum: f64 = row.iter().sum();
                if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::usage(format!("probability row {i} is not a distribution (sum {sum})")));
                }
                for (k, &p) in row.iter().enumerate() {
                    let d = p - if k == t { 1.0 } else { 0.0 };
                    sq += d * d;
                    abs += d.abs();
                }
            }
            let n = (rows.len() * c) as f64;
            (Some((sq / n).sqrt()), Some(abs / n))
        }
    };

    Ok(MetricsReport {
        confusion: cm.clone(),
        samples: total,
        accuracy: cm.trace() as f64 / total as f64,
        sensitivity,
        specificity,
        precision,
        recall,
        f_score: harmonic(precision, recall),
        mean_class_f1,
        rmse,
        mae,
        per_class,
        published_reference: PUBLISHED_REFERENCE,
    })
}

/// Convenience: confusion matrix and report from labels and optional distributions.
pub fn evaluate_predictions(
    truth: &[usize],
    predicted: &[usize],
    probs: Option<&[Vec<f64>]>,
    n_classes: usize,
) -> Result<MetricsReport> {
    let cm = confusion(truth, predicted, n_classes)?;
    derive_metrics(&cm, probs, truth)
}
