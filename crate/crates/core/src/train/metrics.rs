use serde::{Deserialize, Serialize};

use super::trainer::EpochRecord;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    #[default]
    Segment,
    Subject,
}

impl Level {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "segment" => Some(Level::Segment),
            "subject" => Some(Level::Subject),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Segment => "segment",
            Level::Subject => "subject",
        }
    }
}

/// Binary confusion counts; PD is the positive class.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ConfusionMatrix {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

/// Percentages. Only accuracy exists for single-class data; precision (and
/// so F1) is absent when nothing was predicted positive.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl ConfusionMatrix {
    pub fn new(tp: usize, fn_: usize, fp: usize, tn: usize) -> Self {
        ConfusionMatrix { tp, fn_, fp, tn }
    }

    /// Count from 0/1 truth and predictions.
    pub fn from_labels(truth: &[u8], pred: &[u8]) -> Self {
        assert_eq!(truth.len(), pred.len(), "truth and prediction lengths differ");
        let mut cm = ConfusionMatrix::default();
        for (&t, &p) in truth.iter().zip(pred) {
            match (t != 0, p != 0) {
                (true, true) => cm.tp += 1,
                (true, false) => cm.fn_ += 1,
                (false, true) => cm.fp += 1,
                (false, false) => cm.tn += 1,
            }
        }
        cm
    }

    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fn_ += other.fn_;
        self.fp += other.fp;
        self.tn += other.tn;
    }

    pub fn metrics(&self) -> Metrics {
        let pct = |num: usize, den: usize| 100.0 * num as f64 / den as f64;
        let total = self.total();
        let accuracy = if total == 0 { 0.0 } else { pct(self.tp + self.tn, total) };
        let positives = self.tp + self.fn_;
        let negatives = self.fp + self.tn;
        if positives == 0 || negatives == 0 {
            return Metrics {
                accuracy,
                sensitivity: None,
                specificity: None,
                precision: None,
                recall: None,
                f1: None,
            };
        }
        let recall = pct(self.tp, positives);
        let precision = (self.tp + self.fp > 0).then(|| pct(self.tp, self.tp + self.fp));
        let f1 = precision.map(|p| if p + recall == 0.0 { 0.0 } else { 2.0 * p * recall / (p + recall) });
        Metrics {
            accuracy,
            sensitivity: Some(recall),
            specificity: Some(pct(self.tn, negatives)),
            precision,
            recall: Some(recall),
            f1,
        }
    }
}

/// Majority vote of one subject's segment predictions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectVerdict {
    pub subject: String,
    pub label: u8,
    pub segments: usize,
    pub pd_votes: usize,
    pub predicted: u8,
}

/// Per-subject majority vote, ties going to PD; subjects in first-appearance order.
pub fn subject_votes(subject_ids: &[String], truth: &[u8], pred: &[u8]) -> Vec<SubjectVerdict> {
    let mut out: Vec<SubjectVerdict> = Vec::new();
    let mut pos = std::collections::HashMap::new();
    for ((s, &t), &p) in subject_ids.iter().zip(truth).zip(pred) {
        let k = *pos.entry(s.clone()).or_insert_with(|| {
            out.push(SubjectVerdict {
                subject: s.clone(),
                label: t,
                segments: 0,
                pd_votes: 0,
                predicted: 0,
            });
            out.len() - 1
        });
        out[k].segments += 1;
        out[k].pd_votes += usize::from(p != 0);
    }
    for v in &mut out {
        v.predicted = u8::from(2 * v.pd_votes >= v.segments);
    }
    out
}

/// Metrics at one level, with optional per-fold detail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub level: Level,
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    /// Filled at subject level.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subjects: Vec<SubjectVerdict>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_fold: Vec<FoldMetrics>,
}

/// Test metrics of one fold plus its training curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub best_epoch: usize,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub curve: Vec<EpochRecord>,
}

impl EvaluationReport {
    /// Score predictions at `level`.
    pub fn from_predictions(level: Level, threshold: f64, subject_ids: &[String], truth: &[u8], probs: &[f64]) -> Self {
        let pred = crate::model::predict_label(probs, threshold);
        match level {
            Level::Segment => EvaluationReport {
                level,
                threshold,
                confusion: ConfusionMatrix::from_labels(truth, &pred),
                metrics: ConfusionMatrix::from_labels(truth, &pred).metrics(),
                subjects: Vec::new(),
                per_fold: Vec::new(),
            },
            Level::Subject => {
                let subjects = subject_votes(subject_ids, truth, &pred);
                let t: Vec<u8> = subjects.iter().map(|v| v.label).collect();
                let p: Vec<u8> = subjects.iter().map(|v| v.predicted).collect();
                let confusion = ConfusionMatrix::from_labels(&t, &p);
                EvaluationReport {
                    level,
                    threshold,
                    confusion,
                    metrics: confusion.metrics(),
                    subjects,
                    per_fold: Vec::new(),
                }
            }
        }
    }
}
