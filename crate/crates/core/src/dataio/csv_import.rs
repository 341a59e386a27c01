use std::path::Path;

use super::DataError;
use crate::signal::{Diagnosis, Medication, Recording};

#[derive(Clone, Debug)]
pub struct CsvMetadata {
    pub subject_id: String,
    pub label: Diagnosis,
    pub medication: Medication,
}

/// One column per channel, header row of channel labels, one row per sample.
pub fn import_csv(path: &Path, fs_hz: f64, meta: &CsvMetadata) -> Result<Recording, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DataError::Csv {
            path: path.into(),
            row: 0,
            reason: e.to_string(),
        })?;
    let labels: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::Csv {
            path: path.into(),
            row: 1,
            reason: e.to_string(),
        })?
        .iter()
        .map(String::from)
        .collect();
    if labels.is_empty() || labels.iter().all(|l| l.is_empty()) {
        return Err(DataError::Csv {
            path: path.into(),
            row: 1,
            reason: "missing header row".into(),
        });
    }
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
    for (i, rec) in reader.records().enumerate() {
        // 1-based, counting the header
        let row = i + 2;
        let rec = rec.map_err(|e| DataError::Csv {
            path: path.into(),
            row,
            reason: e.to_string(),
        })?;
        if rec.len() != labels.len() {
            return Err(DataError::Csv {
                path: path.into(),
                row,
                reason: format!("{} fields, expected {}", rec.len(), labels.len()),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| DataError::Csv {
                path: path.into(),
                row,
                reason: format!("column `{}`: `{cell}` is not a number", labels[c]),
            })?;
            samples[c].push(v);
        }
    }
    if samples[0].is_empty() {
        return Err(DataError::Csv {
            path: path.into(),
            row: 1,
            reason: "no data rows".into(),
        });
    }
    Ok(Recording::new(meta.subject_id.clone(), meta.label, meta.medication, fs_hz, labels, samples)?)
}
