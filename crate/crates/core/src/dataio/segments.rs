//! Preprocessed segment batches on disk.
//!
//! `segments.bin`: magic `PDEEGSEG`, `u32` LE header length, JSON header with
//! the batch metadata, then `N · channels · samples` LE `f32` values.
//! `summary.json` holds per-recording preprocessing bookkeeping.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lock::{read_all, write_locked};
use super::DataError;
use crate::signal::{Diagnosis, Medication, PreprocessInfo, SegmentBatch};

pub const MAGIC: &[u8; 8] = b"PDEEGSEG";
pub const FORMAT_VERSION: u32 = 1;
pub const SEGMENTS_FILE: &str = "segments.bin";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Serialize, Deserialize)]
struct SegHeader {
    format_version: u32,
    n_segments: usize,
    channels: usize,
    samples: usize,
    channel_labels: Vec<String>,
    labels: Vec<Diagnosis>,
    subject_ids: Vec<String>,
    medication: Vec<Medication>,
    dtype: String,
    byte_order: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub fs_hz: f64,
    pub channels: usize,
    pub samples_per_segment: usize,
    pub total_segments: usize,
    pub standardized: bool,
    pub recordings: Vec<PreprocessInfo>,
    /// Recordings that could not be used, with the reason.
    pub skipped: Vec<(String, String)>,
}

pub fn write_segments(batch: &SegmentBatch, summary: &SegmentSummary, dir: &Path) -> Result<(), DataError> {
    batch.validate()?;
    let h = SegHeader {
        format_version: FORMAT_VERSION,
        n_segments: batch.len(),
        channels: batch.channels,
        samples: batch.samples,
        channel_labels: batch.channel_labels.clone(),
        labels: batch.labels.clone(),
        subject_ids: batch.subject_ids.clone(),
        medication: batch.medication.clone(),
        dtype: "f32".into(),
        byte_order: "little".into(),
    };
    let header = serde_json::to_vec(&h).expect("header serialises");
    let mut out = Vec::with_capacity(12 + header.len() + 4 * batch.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for &v in &batch.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_locked(&dir.join(SEGMENTS_FILE), &out)?;
    let mut s = serde_json::to_vec_pretty(summary).expect("summary serialises");
    s.push(b'\n');
    write_locked(&dir.join(SUMMARY_FILE), &s)
}

pub fn read_segments(dir: &Path) -> Result<SegmentBatch, DataError> {
    let path = dir.join(SEGMENTS_FILE);
    let bytes = read_all(&path)?;
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(DataError::BadMagic {
            path,
            expected: "segment batch",
        });
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if 12 + hlen > bytes.len() {
        return Err(DataError::header(&path, "header length exceeds file size"));
    }
    let h: SegHeader =
        serde_json::from_slice(&bytes[12..12 + hlen]).map_err(|e| DataError::header(&path, e.to_string()))?;
    if h.format_version != FORMAT_VERSION {
        return Err(DataError::Version {
            path,
            found: h.format_version,
            supported: FORMAT_VERSION,
        });
    }
    let payload = &bytes[12 + hlen..];
    let expected = 4 * (h.n_segments * h.channels * h.samples) as u64;
    if payload.len() as u64 != expected {
        return Err(DataError::Truncated {
            path,
            expected,
            actual: payload.len() as u64,
        });
    }
    let batch = SegmentBatch {
        channels: h.channels,
        samples: h.samples,
        channel_labels: h.channel_labels,
        data: payload.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64).collect(),
        labels: h.labels,
        subject_ids: h.subject_ids,
        medication: h.medication,
    };
    batch.validate()?;
    Ok(batch)
}

pub fn read_summary(dir: &Path) -> Result<SegmentSummary, DataError> {
    let path = dir.join(SUMMARY_FILE);
    serde_json::from_slice(&read_all(&path)?).map_err(|e| DataError::header(&path, e.to_string()))
}
