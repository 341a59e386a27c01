//! Corpus manifest: recording index, per-file digests and a corpus hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::lock::{read_all, write_locked};
use super::raw::decode_header;
use super::{read_recording, sha256_hex, DataError};
use crate::signal::Recording;

pub const MANIFEST_SCHEMA: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub subject_id: String,
    pub label: String,
    pub medication: String,
    pub fs_hz: f64,
    pub n_channels: usize,
    pub n_samples: usize,
    /// SHA-256 of the whole file (header and payload).
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema_version: u32,
    pub montage: String,
    pub recordings: Vec<ManifestEntry>,
    pub content_hash: String,
}

impl CorpusManifest {
    /// Build a manifest for raw files already written under `dir`.
    pub fn from_files(dir: &Path, rel_paths: &[String], montage: &str) -> Result<Self, DataError> {
        let mut recordings = Vec::with_capacity(rel_paths.len());
        for rel in rel_paths {
            let path = dir.join(rel);
            let bytes = read_all(&path)?;
            let (h, _) = decode_header(&bytes, &path)?;
            recordings.push(ManifestEntry {
                path: rel.clone(),
                subject_id: h.subject_id,
                label: h.label,
                medication: h.medication,
                fs_hz: h.fs_hz,
                n_channels: h.n_channels,
                n_samples: h.n_samples,
                sha256: sha256_hex(&bytes),
            });
        }
        let mut m = CorpusManifest {
            schema_version: MANIFEST_SCHEMA,
            montage: montage.into(),
            recordings,
            content_hash: String::new(),
        };
        m.content_hash = m.digest();
        Ok(m)
    }

    /// Hash over the montage and every entry, file digests included.
    pub fn digest(&self) -> String {
        let mut buf = Vec::new();
        buf.extend_from_slice(format!("schema={}\nmontage={}\n", self.schema_version, self.montage).as_bytes());
        for e in &self.recordings {
            buf.extend_from_slice(
                format!(
                    "{}|{}|{}|{}|{}|{}|{}|{}\n",
                    e.path, e.subject_id, e.label, e.medication, e.fs_hz, e.n_channels, e.n_samples, e.sha256
                )
                .as_bytes(),
            );
        }
        sha256_hex(&buf)
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serialises");
        bytes.push(b'\n');
        write_locked(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let bytes = read_all(path)?;
        let m: CorpusManifest =
            serde_json::from_slice(&bytes).map_err(|e| DataError::header(path, e.to_string()))?;
        if m.schema_version != MANIFEST_SCHEMA {
            return Err(DataError::Version {
                path: path.into(),
                found: m.schema_version,
                supported: MANIFEST_SCHEMA,
            });
        }
        Ok(m)
    }

    /// Check every file exists and matches its digest, and the corpus hash.
    pub fn verify(&self, dir: &Path) -> Result<(), DataError> {
        for e in &self.recordings {
            let path = dir.join(&e.path);
            let actual = sha256_hex(&read_all(&path)?);
            if actual != e.sha256 {
                return Err(DataError::Hash {
                    path,
                    expected: e.sha256.clone(),
                    actual,
                });
            }
        }
        let d = self.digest();
        if d != self.content_hash {
            return Err(DataError::Hash {
                path: dir.join(MANIFEST_FILE),
                expected: self.content_hash.clone(),
                actual: d,
            });
        }
        Ok(())
    }

    pub fn paths(&self, dir: &Path) -> Vec<PathBuf> {
        self.recordings.iter().map(|e| dir.join(&e.path)).collect()
    }

    /// Verify, then read every recording.
    pub fn load_recordings(&self, dir: &Path) -> Result<Vec<Recording>, DataError> {
        self.verify(dir)?;
        self.paths(dir).iter().map(|p| read_recording(p)).collect()
    }
}
