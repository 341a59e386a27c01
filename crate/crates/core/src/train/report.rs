//! JSON and CSV writers for reports, curves and tables.

use std::path::Path;

use serde::Serialize;

use super::{AblationRow, ConfusionMatrix, EpochRecord, Metrics, Trial};
use crate::dataio::{write_locked, DataError};

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn metric_cells(m: &Metrics) -> Vec<String> {
    vec![
        m.accuracy.to_string(),
        opt(m.sensitivity),
        opt(m.specificity),
        opt(m.precision),
        opt(m.recall),
        opt(m.f1),
    ]
}

const METRIC_COLUMNS: [&str; 6] = ["accuracy", "sensitivity", "specificity", "precision", "recall", "f1"];

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| DataError::header(path, e.to_string()))?;
    s.push('\n');
    write_locked(path, s.as_bytes())
}

/// Rows are actual classes, columns predicted classes.
pub fn write_confusion_csv(path: &Path, cm: &ConfusionMatrix) -> Result<(), DataError> {
    let rows = vec![
        vec!["PD".into(), cm.tp.to_string(), cm.fn_.to_string()],
        vec!["HC".into(), cm.fp.to_string(), cm.tn.to_string()],
    ];
    write_locked(path, &csv_bytes(&["actual", "predicted_PD", "predicted_HC"], rows))
}

pub fn write_curve_csv(path: &Path, curve: &[EpochRecord]) -> Result<(), DataError> {
    let rows = curve
        .iter()
        .map(|r| vec![r.epoch.to_string(), r.train_loss.to_string(), r.val_loss.to_string()]);
    write_locked(path, &csv_bytes(&["epoch", "train_loss", "val_loss"], rows))
}

pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<(), DataError> {
    let mut header = vec!["architecture"];
    header.extend(METRIC_COLUMNS);
    header.extend(["subject_accuracy", "parameters"]);
    let rows = rows.iter().map(|r| {
        let mut v = vec![r.architecture.clone()];
        v.extend(metric_cells(&r.segment));
        v.push(r.subject.accuracy.to_string());
        v.push(r.parameters.to_string());
        v
    });
    write_locked(path, &csv_bytes(&header, rows))
}

pub fn write_trials_csv(path: &Path, trials: &[Trial]) -> Result<(), DataError> {
    let header = [
        "trial",
        "conv_arch",
        "rnn_layers",
        "rnn_units",
        "attention_nodes",
        "fc_layers",
        "fc_nodes",
        "dropout",
        "learning_rate",
        "batch_size",
        "mean_val_accuracy",
        "mean_val_loss",
    ];
    let rows = trials.iter().map(|t| {
        vec![
            t.index.to_string(),
            format!("{:?}", t.model.conv_arch).to_lowercase(),
            t.model.rnn_layers.to_string(),
            t.model.rnn_units.to_string(),
            t.model.attention_nodes.to_string(),
            t.model.fc_layers.to_string(),
            t.model.fc_nodes.to_string(),
            t.model.dropout_p.to_string(),
            t.train.learning_rate.to_string(),
            t.train.batch_size.to_string(),
            t.mean_val_accuracy.to_string(),
            t.mean_val_loss.to_string(),
        ]
    });
    write_locked(path, &csv_bytes(&header, rows))
}
