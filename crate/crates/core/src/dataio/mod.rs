//! On-disk formats and the synthetic EEG corpus generator.

mod csv_import;
mod lock;
pub(crate) use lock::write_locked;
pub mod manifest;
pub mod raw;
pub mod segments;
pub mod synth;

pub use csv_import::{import_csv, CsvMetadata};
pub use manifest::{CorpusManifest, ManifestEntry};
pub use raw::{read_recording, write_recording};
pub use segments::{read_segments, read_summary, write_segments, SegmentSummary};
pub use synth::{synth_corpus, synth_generate, synth_recording, SynthSpec};

use std::path::{Path, PathBuf};

use crate::signal::SignalError;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a {expected} file (bad magic)")]
    BadMagic { path: PathBuf, expected: &'static str },
    #[error("{path}: unsupported format version {found} (supported: {supported})")]
    Version { path: PathBuf, found: u32, supported: u32 },
    #[error("{path}: payload is {actual} bytes, header implies {expected}")]
    Truncated { path: PathBuf, expected: u64, actual: u64 },
    #[error("{path}: invalid header: {reason}")]
    Header { path: PathBuf, reason: String },
    #[error("{path}: row {row}: {reason}")]
    Csv { path: PathBuf, row: usize, reason: String },
    #[error("{path}: hash mismatch (manifest {expected}, file {actual})")]
    Hash { path: PathBuf, expected: String, actual: String },
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

impl DataError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn header(path: &Path, reason: impl Into<String>) -> Self {
        DataError::Header {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }
}

/// SHA-256 of a byte slice as lowercase hex.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
