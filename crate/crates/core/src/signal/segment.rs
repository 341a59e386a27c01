//! Fixed-length windowing into model-ready batches.

use serde::{Deserialize, Serialize};

use super::{Diagnosis, Medication, Recording, SignalError};

pub const TARGET_FS_HZ: f64 = 256.0;
/// Two seconds at 256 Hz.
pub const SEGMENT_SAMPLES: usize = 512;

/// `N × channels × samples` block of segments with per-segment metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentBatch {
    pub channels: usize,
    pub samples: usize,
    pub channel_labels: Vec<String>,
    /// Row-major `[N, channels, samples]`.
    pub data: Vec<f64>,
    pub labels: Vec<Diagnosis>,
    pub subject_ids: Vec<String>,
    pub medication: Vec<Medication>,
}

impl SegmentBatch {
    pub fn empty(channel_labels: Vec<String>, samples: usize) -> Self {
        SegmentBatch {
            channels: channel_labels.len(),
            samples,
            channel_labels,
            data: Vec::new(),
            labels: Vec::new(),
            subject_ids: Vec::new(),
            medication: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn segment_len(&self) -> usize {
        self.channels * self.samples
    }

    pub fn segment(&self, i: usize) -> &[f64] {
        let n = self.segment_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        let n = self.len();
        if self.subject_ids.len() != n || self.medication.len() != n {
            return Err(SignalError::Batch("metadata lengths disagree".into()));
        }
        if self.channel_labels.len() != self.channels {
            return Err(SignalError::Batch("channel label count disagrees".into()));
        }
        if self.data.len() != n * self.segment_len() {
            return Err(SignalError::Batch(format!(
                "data has {} values, expected {}",
                self.data.len(),
                n * self.segment_len()
            )));
        }
        Ok(())
    }

    /// Training targets (PD = 1).
    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.target()).collect()
    }

    /// Distinct subject ids in order of first appearance.
    pub fn subjects(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.subject_ids.iter().filter(|s| seen.insert(s.as_str())).cloned().collect()
    }

    /// Label of each distinct subject, in [`Self::subjects`] order.
    pub fn subject_labels(&self) -> Vec<(String, Diagnosis)> {
        self.subjects()
            .into_iter()
            .map(|s| {
                let i = self.subject_ids.iter().position(|x| *x == s).unwrap();
                (s, self.labels[i])
            })
            .collect()
    }

    pub fn indices_of_subjects(&self, subjects: &[String]) -> Vec<usize> {
        (0..self.len()).filter(|&i| subjects.contains(&self.subject_ids[i])).collect()
    }

    /// New batch holding the given segments, in the given order.
    pub fn select(&self, idx: &[usize]) -> SegmentBatch {
        let n = self.segment_len();
        let mut data = Vec::with_capacity(idx.len() * n);
        for &i in idx {
            data.extend_from_slice(self.segment(i));
        }
        SegmentBatch {
            channels: self.channels,
            samples: self.samples,
            channel_labels: self.channel_labels.clone(),
            data,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            subject_ids: idx.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            medication: idx.iter().map(|&i| self.medication[i]).collect(),
        }
    }

    /// Append `other`; channel layout must match.
    pub fn extend(&mut self, other: &SegmentBatch) -> Result<(), SignalError> {
        if other.channel_labels != self.channel_labels || other.samples != self.samples {
            return Err(SignalError::Batch("cannot concatenate batches with different layouts".into()));
        }
        self.data.extend_from_slice(&other.data);
        self.labels.extend_from_slice(&other.labels);
        self.subject_ids.extend_from_slice(&other.subject_ids);
        self.medication.extend_from_slice(&other.medication);
        Ok(())
    }

    /// Replace one channel with exact zeros in every segment.
    pub fn zero_channel(&mut self, label: &str) -> Result<(), SignalError> {
        let ch = self
            .channel_labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| SignalError::Batch(format!("no channel `{label}`")))?;
        let (s, n) = (self.samples, self.segment_len());
        for seg in self.data.chunks_mut(n) {
            seg[ch * s..(ch + 1) * s].iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(())
    }
}

/// Cut a 256 Hz recording into consecutive non-overlapping windows.
pub fn segment(rec: &Recording, seconds: f64) -> Result<SegmentBatch, SignalError> {
    if rec.fs_hz != TARGET_FS_HZ {
        return Err(SignalError::InvalidRecording(format!(
            "segmenting expects {TARGET_FS_HZ} Hz, got {}",
            rec.fs_hz
        )));
    }
    let win = (seconds * rec.fs_hz).round() as usize;
    if win == 0 {
        return Err(SignalError::Batch("window length is zero".into()));
    }
    let n = rec.n_samples();
    if n < win {
        return Err(SignalError::TooShort { needed: win, actual: n });
    }
    let count = n / win;
    let c = rec.n_channels();
    let mut data = Vec::with_capacity(count * c * win);
    for k in 0..count {
        for row in &rec.samples {
            data.extend_from_slice(&row[k * win..(k + 1) * win]);
        }
    }
    Ok(SegmentBatch {
        channels: c,
        samples: win,
        channel_labels: rec.channel_labels.clone(),
        data,
        labels: vec![rec.label; count],
        subject_ids: vec![rec.subject_id.clone(); count],
        medication: vec![rec.medication; count],
    })
}

/// Per (segment, channel) zero-mean unit-variance scaling.
///
/// Constant traces (including zero-filled channels) become exact zeros.
pub fn standardize(batch: &SegmentBatch, enabled: bool) -> SegmentBatch {
    let mut out = batch.clone();
    if !enabled {
        return out;
    }
    for trace in out.data.chunks_mut(batch.samples) {
        let n = trace.len() as f64;
        let mean = trace.iter().sum::<f64>() / n;
        let var = trace.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        if var > 0.0 && var.is_finite() {
            let inv = 1.0 / var.sqrt();
            trace.iter_mut().for_each(|v| *v = (*v - mean) * inv);
        } else {
            trace.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    out
}
