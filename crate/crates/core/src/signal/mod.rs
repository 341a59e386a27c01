//! EEG preprocessing: montage handling, resampling to 256 Hz, zero-phase
//! band-pass, FastICA artifact removal, segmentation and standardisation.

pub mod filter;
pub mod ica;
pub mod montage;
pub mod pipeline;
mod recording;
pub mod resample;
pub mod segment;

pub use filter::{bandpass, butterworth_bandpass, Biquad, SosFilter};
pub use ica::{fastica, remove_components, IcaConfig, IcaDecomposition};
pub use montage::{select_channels, zero_fill_missing, MontageSpec, BIOSEMI32};
pub use pipeline::{preprocess_corpus, preprocess_recording, CorpusBatch, PreprocessConfig, PreprocessInfo};
pub use recording::{Diagnosis, Medication, Recording};
pub use resample::resample;
pub use segment::{segment, standardize, SegmentBatch, SEGMENT_SAMPLES, TARGET_FS_HZ};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("montage: {0}")]
    Montage(String),
    #[error("subject `{subject}` lacks required channels {labels:?}")]
    MissingChannels { subject: String, labels: Vec<String> },
    #[error("invalid band {low_hz}..{high_hz} Hz for sampling rate {fs_hz} Hz")]
    InvalidBand { low_hz: f64, high_hz: f64, fs_hz: f64 },
    #[error("signal too short: need at least {needed} samples, got {actual}")]
    TooShort { needed: usize, actual: usize },
    #[error("resample: {0}")]
    Resample(String),
    #[error("ica: {0}")]
    Ica(String),
    #[error("component index {index} out of range for {count} components")]
    ComponentOutOfRange { index: usize, count: usize },
    #[error("segment batch: {0}")]
    Batch(String),
}
