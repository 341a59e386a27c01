//! Raw recording files.
//!
//! Layout: the 8-byte magic `PDEEGRAW`, a little-endian `u32` header length,
//! a UTF-8 JSON header, then `n_channels · n_samples` little-endian `f32`
//! values, channel-major.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lock::{read_all, write_locked};
use super::DataError;
use crate::signal::{Diagnosis, Medication, Recording};

pub const MAGIC: &[u8; 8] = b"PDEEGRAW";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub format_version: u32,
    pub subject_id: String,
    pub label: String,
    pub medication: String,
    pub fs_hz: f64,
    pub n_channels: usize,
    pub n_samples: usize,
    pub channel_labels: Vec<String>,
    pub byte_order: String,
    pub dtype: String,
    pub layout: String,
}

impl RawHeader {
    pub fn for_recording(rec: &Recording) -> Self {
        RawHeader {
            format_version: FORMAT_VERSION,
            subject_id: rec.subject_id.clone(),
            label: rec.label.as_str().into(),
            medication: serde_json::to_value(rec.medication)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            fs_hz: rec.fs_hz,
            n_channels: rec.n_channels(),
            n_samples: rec.n_samples(),
            channel_labels: rec.channel_labels.clone(),
            byte_order: "little".into(),
            dtype: "f32".into(),
            layout: "channel-major".into(),
        }
    }
}

/// Serialise to the raw format. Samples are rounded to `f32`.
pub fn encode_recording(rec: &Recording) -> Result<Vec<u8>, DataError> {
    rec.validate()?;
    let header = serde_json::to_vec(&RawHeader::for_recording(rec)).expect("header serialises");
    let mut out = Vec::with_capacity(12 + header.len() + 4 * rec.n_channels() * rec.n_samples());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for row in &rec.samples {
        for &v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_recording(rec: &Recording, path: &Path) -> Result<(), DataError> {
    write_locked(path, &encode_recording(rec)?)
}

/// Parse a raw header and return it with the payload offset.
pub fn decode_header(bytes: &[u8], path: &Path) -> Result<(RawHeader, usize), DataError> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(DataError::BadMagic {
            path: path.into(),
            expected: "raw recording",
        });
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let hend = 12usize
        .checked_add(hlen)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| DataError::header(path, "header length exceeds file size"))?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes[12..hend]).map_err(|e| DataError::header(path, e.to_string()))?;
    // version first so newer files fail with a precise error
    let version = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if version != FORMAT_VERSION {
        return Err(DataError::Version {
            path: path.into(),
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let h: RawHeader = serde_json::from_value(value).map_err(|e| DataError::header(path, e.to_string()))?;
    if h.byte_order != "little" || h.dtype != "f32" || h.layout != "channel-major" {
        return Err(DataError::header(
            path,
            format!("unsupported encoding {}/{}/{}", h.byte_order, h.dtype, h.layout),
        ));
    }
    if h.channel_labels.len() != h.n_channels {
        return Err(DataError::header(
            path,
            format!("{} channel labels for {} channels", h.channel_labels.len(), h.n_channels),
        ));
    }
    Ok((h, hend))
}

pub fn decode_recording(bytes: &[u8], path: &Path) -> Result<Recording, DataError> {
    let (h, off) = decode_header(bytes, path)?;
    let expected = 4u64 * h.n_channels as u64 * h.n_samples as u64;
    let actual = (bytes.len() - off) as u64;
    if actual != expected {
        return Err(DataError::Truncated {
            path: path.into(),
            expected,
            actual,
        });
    }
    let label: Diagnosis = h.label.parse().map_err(|_| DataError::header(path, format!("label `{}`", h.label)))?;
    let medication: Medication = h
        .medication
        .parse()
        .map_err(|_| DataError::header(path, format!("medication `{}`", h.medication)))?;
    let payload = &bytes[off..];
    let samples = (0..h.n_channels)
        .map(|c| {
            payload[c * h.n_samples * 4..(c + 1) * h.n_samples * 4]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                .collect()
        })
        .collect();
    Ok(Recording::new(h.subject_id, label, medication, h.fs_hz, h.channel_labels, samples)?)
}

pub fn read_recording(path: &Path) -> Result<Recording, DataError> {
    decode_recording(&read_all(path)?, path)
}
