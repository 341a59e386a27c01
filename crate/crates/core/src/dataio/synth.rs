//! Synthetic resting-state EEG with a controllable class difference.
//!
//! Each channel is pink background noise plus theta, alpha and beta activity.
//! Band activity comes from a few latent band-limited noise sources with slow
//! random envelopes, projected onto the scalp with topographies that are fixed
//! for the whole corpus. Subjects of one class are therefore statistically
//! identical; the only class difference is that PD scales beta amplitude by
//! `separation` and alpha amplitude by `1 / separation`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::manifest::{CorpusManifest, MANIFEST_FILE};
use super::{write_recording, DataError};
use crate::signal::{Diagnosis, Medication, Recording, BIOSEMI32};

const BANDS: [(f64, f64); 3] = [(4.0, 8.0), (8.0, 13.0), (13.0, 30.0)];
const SOURCES_PER_BAND: usize = 4;
/// RMS amplitudes in microvolts: pink, theta, alpha, beta (healthy class).
const AMP_PINK: f64 = 8.0;
const AMP_BANDS: [f64; 3] = [5.0, 10.0, 4.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_pd: usize,
    pub n_hc: usize,
    pub duration_s: f64,
    pub fs_hz: f64,
    pub seed: u64,
    /// PD beta amplitude multiplier; PD alpha is divided by the same factor.
    pub separation: f64,
    /// Canonical channels to leave out (e.g. `["Pz"]` for a UI-style corpus).
    pub omit_channels: Vec<String>,
    /// Additional non-canonical channels (32 gives a 64-channel corpus).
    pub extra_channels: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_pd: 20,
            n_hc: 20,
            duration_s: 60.0,
            fs_hz: 512.0,
            seed: 7,
            separation: 2.0,
            omit_channels: Vec::new(),
            extra_channels: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        // single-class corpora are allowed (hold-out sets of patients only)
        if self.n_pd + self.n_hc == 0 {
            return Err(DataError::Spec("need at least one subject".into()));
        }
        if !(self.duration_s >= 2.0) {
            return Err(DataError::Spec(format!("duration {} s is shorter than 2 s", self.duration_s)));
        }
        if !(self.fs_hz.is_finite() && self.fs_hz >= 128.0) {
            return Err(DataError::Spec(format!("sampling rate {} Hz is too low", self.fs_hz)));
        }
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return Err(DataError::Spec("separation must be positive".into()));
        }
        if let Some(bad) = self.omit_channels.iter().find(|c| !BIOSEMI32.contains(&c.as_str())) {
            return Err(DataError::Spec(format!("cannot omit unknown channel `{bad}`")));
        }
        Ok(())
    }

    pub fn n_subjects(&self) -> usize {
        self.n_pd + self.n_hc
    }

    /// Subject id and diagnosis of subject `i` (PD first, then HC).
    pub fn subject(&self, i: usize) -> (String, Diagnosis) {
        if i < self.n_pd {
            (format!("pd{:03}", i + 1), Diagnosis::Parkinsons)
        } else {
            (format!("hc{:03}", i - self.n_pd + 1), Diagnosis::Healthy)
        }
    }

    fn channel_labels(&self) -> Vec<String> {
        BIOSEMI32
            .iter()
            .filter(|l| !self.omit_channels.iter().any(|o| o == *l))
            .map(|s| s.to_string())
            .chain((1..=self.extra_channels).map(|i| format!("X{i:02}")))
            .collect()
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Real Gaussian noise with spectral magnitude `shape(f)`, scaled to unit RMS.
fn shaped_noise(rng: &mut ChaCha8Rng, planner: &mut FftPlanner<f64>, n: usize, fs: f64, shape: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..=n / 2 {
        let f = k as f64 * fs / n as f64;
        let a = shape(f);
        let (re, im) = (normal(rng), normal(rng));
        if a == 0.0 {
            continue;
        }
        spec[k] = Complex64::new(re, im) * a;
        if k != n - k {
            spec[n - k] = spec[k].conj();
        } else {
            spec[k].im = 0.0;
        }
    }
    planner.plan_fft_inverse(n).process(&mut spec);
    let mut out: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v /= rms);
    }
    out
}

/// Topographies, one row of channel gains per latent source, shared by the corpus.
fn topographies(seed: u64, n_channels: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    (0..BANDS.len() * SOURCES_PER_BAND)
        .map(|_| (0..n_channels).map(|_| rng.random_range(0.2..1.0)).collect())
        .collect()
}

/// Generate subject `index` of the corpus described by `spec`.
pub fn synth_recording(spec: &SynthSpec, index: usize) -> Result<Recording, DataError> {
    spec.validate()?;
    if index >= spec.n_subjects() {
        return Err(DataError::Spec(format!("subject index {index} out of range")));
    }
    let labels = spec.channel_labels();
    let c = labels.len();
    let n = (spec.duration_s * spec.fs_hz).round() as usize;
    let fs = spec.fs_hz;
    let (id, label) = spec.subject(index);
    let topo = topographies(spec.seed, c);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64 + 1);
    let mut planner = FftPlanner::new();

    let mut amps = AMP_BANDS;
    if label.is_positive() {
        amps[1] /= spec.separation;
        amps[2] *= spec.separation;
    }

    let mut rows: Vec<Vec<f64>> = (0..c)
        .map(|_| {
            let mut p = shaped_noise(&mut rng, &mut planner, n, fs, |f| if f >= 0.5 { f.powf(-0.5) } else { 0.0 });
            p.iter_mut().for_each(|v| *v *= AMP_PINK);
            p
        })
        .collect();

    let norm = (SOURCES_PER_BAND as f64).sqrt();
    for (b, &(lo, hi)) in BANDS.iter().enumerate() {
        for s in 0..SOURCES_PER_BAND {
            let src = shaped_noise(&mut rng, &mut planner, n, fs, |f| if f >= lo && f <= hi { 1.0 } else { 0.0 });
            let slow = shaped_noise(&mut rng, &mut planner, n, fs, |f| if f <= 0.5 { 1.0 } else { 0.0 });
            let env: Vec<f64> = slow.iter().map(|z| (0.35 * z).exp()).collect();
            let env_rms = (env.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
            let g = &topo[b * SOURCES_PER_BAND + s];
            for (ch, row) in rows.iter_mut().enumerate() {
                let k = amps[b] * g[ch] / (norm * env_rms);
                for t in 0..n {
                    row[t] += k * env[t] * src[t];
                }
            }
        }
    }

    let medication = match label {
        Diagnosis::Parkinsons if index % 2 == 0 => Medication::On,
        Diagnosis::Parkinsons => Medication::Off,
        Diagnosis::Healthy => Medication::NotApplicable,
    };
    Ok(Recording::new(id, label, medication, fs, labels, rows)?)
}

/// Every recording of the corpus, in memory.
pub fn synth_corpus(spec: &SynthSpec) -> Result<Vec<Recording>, DataError> {
    spec.validate()?;
    (0..spec.n_subjects()).map(|i| synth_recording(spec, i)).collect()
}

/// Write the corpus as raw files plus `manifest.json` under `out_dir`.
pub fn synth_generate(spec: &SynthSpec, out_dir: &Path) -> Result<CorpusManifest, DataError> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| DataError::io(out_dir, e))?;
    let mut rels = Vec::with_capacity(spec.n_subjects());
    for i in 0..spec.n_subjects() {
        let rec = synth_recording(spec, i)?;
        let rel = format!("{}.raw", rec.subject_id);
        write_recording(&rec, &out_dir.join(&rel))?;
        rels.push(rel);
    }
    let m = CorpusManifest::from_files(out_dir, &rels, "biosemi32")?;
    m.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(m)
}
