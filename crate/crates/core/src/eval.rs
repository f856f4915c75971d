//! Top-1 accuracy, confusion matrices, and condition comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The three feature conditions of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// SVM on the raw voice embeddings.
    VoiceOnlyBaseline,
    /// Fusion-layer features with both voice and face supplied.
    FusedAided,
    /// Fusion-layer features with the face input replaced by zeros.
    FusedMasked,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::VoiceOnlyBaseline => "voice_only_baseline",
            Condition::FusedAided => "fused_aided",
            Condition::FusedMasked => "fused_masked",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn top1_accuracy(predictions: &[usize], truths: &[usize]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::dim(
            "predictions vs truths",
            truths.len(),
            predictions.len(),
        ));
    }
    if truths.is_empty() {
        return Err(Error::EmptyDataset("no predictions to score".into()));
    }
    let hits = predictions
        .iter()
        .zip(truths)
        .filter(|(p, t)| p == t)
        .count();
    Ok(hits as f64 / truths.len() as f64)
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<u64>>", try_from = "Vec<Vec<u64>>")]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.num_classes + pred]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.num_classes..(truth + 1) * self.num_classes]
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.num_classes)
            .map(|i| self.row(i).iter().sum())
            .collect()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes).map(|i| self.get(i, i)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// CSV with a header row of class labels; the first column names the true class.
    pub fn to_csv(&self, labels: &[String]) -> String {
        let name = |i: usize| labels.get(i).cloned().unwrap_or_else(|| i.to_string());
        let mut out = String::from("true\\pred");
        for j in 0..self.num_classes {
            out.push(',');
            out.push_str(&name(j));
        }
        out.push('\n');
        for i in 0..self.num_classes {
            out.push_str(&name(i));
            for c in self.row(i) {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

impl From<ConfusionMatrix> for Vec<Vec<u64>> {
    fn from(m: ConfusionMatrix) -> Self {
        m.counts
            .chunks(m.num_classes.max(1))
            .map(<[u64]>::to_vec)
            .collect()
    }
}

impl TryFrom<Vec<Vec<u64>>> for ConfusionMatrix {
    type Error = String;

    fn try_from(rows: Vec<Vec<u64>>) -> std::result::Result<Self, String> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err("confusion matrix must be square".into());
        }
        Ok(ConfusionMatrix {
            num_classes: n,
            counts: rows.into_iter().flatten().collect(),
        })
    }
}

pub fn confusion_matrix(
    predictions: &[usize],
    truths: &[usize],
    num_classes: usize,
) -> Result<ConfusionMatrix> {
    if predictions.len() != truths.len() {
        return Err(Error::dim(
            "predictions vs truths",
            truths.len(),
            predictions.len(),
        ));
    }
    let mut counts = vec![0u64; num_classes * num_classes];
    for (&p, &t) in predictions.iter().zip(truths) {
        if p >= num_classes || t >= num_classes {
            return Err(Error::InvalidLabel(format!(
                "label {} outside [0, {num_classes})",
                p.max(t)
            )));
        }
        counts[t * num_classes + p] += 1;
    }
    Ok(ConfusionMatrix {
        num_classes,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub condition: Condition,
    pub top1: f64,
    pub n_samples: usize,
    /// Classes absent from the test set have no entry.
    pub per_class_accuracy: BTreeMap<usize, f64>,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn new(
        condition: Condition,
        predictions: &[usize],
        truths: &[usize],
        num_classes: usize,
    ) -> Result<Self> {
        if truths.is_empty() {
            return Err(Error::EmptyDataset("no test samples".into()));
        }
        let confusion = confusion_matrix(predictions, truths, num_classes)?;
        let per_class_accuracy = confusion
            .row_sums()
            .into_iter()
            .enumerate()
            .filter(|&(_, n)| n > 0)
            .map(|(i, n)| (i, confusion.get(i, i) as f64 / n as f64))
            .collect();
        Ok(EvalReport {
            condition,
            top1: confusion.trace() as f64 / confusion.total() as f64,
            n_samples: truths.len(),
            per_class_accuracy,
            confusion,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub condition: Condition,
    pub top1: f64,
    pub n_samples: usize,
    /// `top1 - reference.top1`, keyed by the reference condition.
    pub deltas: BTreeMap<Condition, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reference: Condition,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn delta(&self, condition: Condition) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.condition == condition)
            .and_then(|r| r.deltas.get(&self.reference).copied())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<22} {:>8} {:>9} {:>8}\n",
            "condition", "top1", "delta", "n"
        );
        for r in &self.rows {
            let delta = r.deltas.get(&self.reference).copied().unwrap_or(0.0);
            let _ = writeln!(
                out,
                "{:<22} {:>8.4} {:>+9.4} {:>8}",
                r.condition.as_str(),
                r.top1,
                delta,
                r.n_samples
            );
        }
        let _ = writeln!(out, "(delta relative to {})", self.reference);
        out
    }
}

/// Tabulates reports against `voice_only_baseline` when present, else the first report.
pub fn compare_conditions(reports: &[EvalReport]) -> Result<Comparison> {
    if reports.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "comparison needs at least 2 reports, got {}",
            reports.len()
        )));
    }
    let reference = reports
        .iter()
        .find(|r| r.condition == Condition::VoiceOnlyBaseline)
        .unwrap_or(&reports[0]);
    let class_counts = reference.confusion.row_sums();
    for r in reports {
        if r.n_samples != reference.n_samples || r.confusion.row_sums() != class_counts {
            return Err(Error::MismatchedTestSets(format!(
                "{} ({} samples) vs {} ({} samples) cover different test sets",
                r.condition, r.n_samples, reference.condition, reference.n_samples
            )));
        }
    }
    let rows = reports
        .iter()
        .map(|r| ComparisonRow {
            condition: r.condition,
            top1: r.top1,
            n_samples: r.n_samples,
            deltas: BTreeMap::from([(reference.condition, r.top1 - reference.top1)]),
        })
        .collect();
    Ok(Comparison {
        reference: reference.condition,
        rows,
    })
}
