use serde::{Deserialize, Serialize};

use super::SignalError;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Diagnosis {
    #[serde(rename = "PD")]
    Parkinsons,
    #[serde(rename = "HC")]
    Healthy,
}

impl Diagnosis {
    /// Training target: PD is the positive class.
    pub fn target(self) -> f64 {
        match self {
            Diagnosis::Parkinsons => 1.0,
            Diagnosis::Healthy => 0.0,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Diagnosis::Parkinsons
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Diagnosis::Parkinsons => "PD",
            Diagnosis::Healthy => "HC",
        }
    }
}

impl std::str::FromStr for Diagnosis {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "PD" => Ok(Diagnosis::Parkinsons),
            "HC" => Ok(Diagnosis::Healthy),
            _ => Err(SignalError::InvalidRecording(format!("unknown diagnosis label `{s}`"))),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Medication {
    #[serde(rename = "on")]
    On,
    #[serde(rename = "off")]
    Off,
    #[default]
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl std::str::FromStr for Medication {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "on" => Ok(Medication::On),
            "off" => Ok(Medication::Off),
            "n/a" | "na" | "" => Ok(Medication::NotApplicable),
            _ => Err(SignalError::InvalidRecording(format!("unknown medication state `{s}`"))),
        }
    }
}

/// One subject's multichannel EEG, channel-major, in microvolts.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub label: Diagnosis,
    pub medication: Medication,
    pub fs_hz: f64,
    pub channel_labels: Vec<String>,
    /// One row per channel.
    pub samples: Vec<Vec<f64>>,
    /// Canonical channels that were absent and replaced with zeros.
    pub zero_filled: Vec<String>,
}

impl Recording {
    pub fn new(
        subject_id: impl Into<String>,
        label: Diagnosis,
        medication: Medication,
        fs_hz: f64,
        channel_labels: Vec<String>,
        samples: Vec<Vec<f64>>,
    ) -> Result<Self, SignalError> {
        let rec = Recording {
            subject_id: subject_id.into(),
            label,
            medication,
            fs_hz,
            channel_labels,
            samples,
            zero_filled: Vec::new(),
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.fs_hz.is_finite() && self.fs_hz > 0.0) {
            return Err(SignalError::InvalidRecording(format!("sampling rate {} is not positive", self.fs_hz)));
        }
        if self.samples.len() != self.channel_labels.len() {
            return Err(SignalError::InvalidRecording(format!(
                "{} channel labels for {} rows",
                self.channel_labels.len(),
                self.samples.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &self.channel_labels {
            if !seen.insert(l.as_str()) {
                return Err(SignalError::InvalidRecording(format!("duplicate channel label `{l}`")));
            }
        }
        let n = self.n_samples();
        for (row, label) in self.samples.iter().zip(&self.channel_labels) {
            if row.len() != n {
                return Err(SignalError::InvalidRecording(format!(
                    "channel `{label}` has {} samples, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(SignalError::InvalidRecording(format!("channel `{label}` has non-finite samples")));
            }
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs_hz
    }

    pub fn channel(&self, label: &str) -> Option<&[f64]> {
        self.channel_labels.iter().position(|l| l == label).map(|i| self.samples[i].as_slice())
    }

    /// Same metadata, new channel rows.
    pub(crate) fn with_samples(&self, fs_hz: f64, samples: Vec<Vec<f64>>) -> Recording {
        Recording {
            subject_id: self.subject_id.clone(),
            label: self.label,
            medication: self.medication,
            fs_hz,
            channel_labels: self.channel_labels.clone(),
            samples,
            zero_filled: self.zero_filled.clone(),
        }
    }
}
