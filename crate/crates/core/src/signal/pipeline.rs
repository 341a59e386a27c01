//! The full chain: select → zero-fill → resample → band-pass → ICA →
//! segment → standardize.

use serde::{Deserialize, Serialize};

use super::{
    bandpass, fastica, remove_components, resample, segment, select_channels, standardize, zero_fill_missing,
    IcaConfig, MontageSpec, Recording, SegmentBatch, SignalError, TARGET_FS_HZ,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub montage: MontageSpec,
    pub target_hz: f64,
    pub low_hz: f64,
    pub high_hz: f64,
    pub filter_order: usize,
    pub segment_s: f64,
    pub standardize: bool,
    /// Components to reject; ICA is skipped when `None`.
    pub ica_reject: Option<Vec<usize>>,
    pub ica: IcaConfig,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            montage: MontageSpec::biosemi32(),
            target_hz: TARGET_FS_HZ,
            low_hz: 0.5,
            high_hz: 64.0,
            filter_order: 4,
            segment_s: 2.0,
            standardize: true,
            ica_reject: None,
            ica: IcaConfig::default(),
        }
    }
}

/// Bookkeeping for one processed recording.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessInfo {
    pub subject_id: String,
    pub input_fs_hz: f64,
    pub output_fs_hz: f64,
    pub input_channels: usize,
    pub zero_filled: Vec<String>,
    pub segments: usize,
    pub ica_rank: Option<usize>,
    /// Advisory kurtosis-based rejection candidates (ICA runs only).
    pub ica_suggested: Vec<usize>,
}

pub fn preprocess_recording(
    rec: &Recording,
    cfg: &PreprocessConfig,
) -> Result<(SegmentBatch, PreprocessInfo), SignalError> {
    rec.validate()?;
    let r = select_channels(rec, &cfg.montage)?;
    let r = zero_fill_missing(&r, &cfg.montage)?;
    let r = resample(&r, cfg.target_hz)?;
    let r = bandpass(&r, cfg.low_hz, cfg.high_hz, cfg.filter_order)?;
    let (r, ica_rank, ica_suggested) = match &cfg.ica_reject {
        Some(reject) => {
            let d = fastica(&r, &cfg.ica)?;
            let out = remove_components(&r, &d, reject)?;
            (out, Some(d.rank), d.suggest_rejections(5.0))
        }
        None => (r, None, Vec::new()),
    };
    let batch = standardize(&segment(&r, cfg.segment_s)?, cfg.standardize);
    let info = PreprocessInfo {
        subject_id: rec.subject_id.clone(),
        input_fs_hz: rec.fs_hz,
        output_fs_hz: r.fs_hz,
        input_channels: rec.n_channels(),
        zero_filled: r.zero_filled.clone(),
        segments: batch.len(),
        ica_rank,
        ica_suggested,
    };
    Ok((batch, info))
}

/// Preprocessed corpus: concatenated segments plus per-recording notes.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusBatch {
    pub batch: SegmentBatch,
    pub info: Vec<PreprocessInfo>,
    /// `(subject, reason)` for recordings too short to yield one segment.
    pub skipped: Vec<(String, String)>,
}

/// Run [`preprocess_recording`] over `recs` in order and concatenate.
///
/// Recordings shorter than one segment are skipped with a warning; every
/// other failure is returned.
pub fn preprocess_corpus(recs: &[Recording], cfg: &PreprocessConfig) -> Result<CorpusBatch, SignalError> {
    let samples = (cfg.segment_s * cfg.target_hz).round() as usize;
    let mut batch = SegmentBatch::empty(cfg.montage.canonical_labels.clone(), samples);
    let mut info = Vec::new();
    let mut skipped = Vec::new();
    for rec in recs {
        let dur = rec.n_samples() as f64 / rec.fs_hz;
        if dur < cfg.segment_s {
            let reason = format!("{dur:.3} s is shorter than one {} s segment", cfg.segment_s);
            log::warn!("skipping {}: {reason}", rec.subject_id);
            skipped.push((rec.subject_id.clone(), reason));
            continue;
        }
        let (b, i) = preprocess_recording(rec, cfg)?;
        batch.extend(&b)?;
        info.push(i);
    }
    Ok(CorpusBatch { batch, info, skipped })
}
