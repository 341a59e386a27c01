//! The full recording-to-segments chain on one synthetic PD subject, once
//! with the complete montage and once with Pz missing.
//!
//! cargo run --release --example preprocess_pipeline

use pdeeg::dataio::{synth_recording, SynthSpec};
use pdeeg::signal::{preprocess_recording, PreprocessConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for omit in [vec![], vec!["Pz".to_string()]] {
        let spec = SynthSpec { n_pd: 1, n_hc: 1, duration_s: 12.0, fs_hz: 500.0, omit_channels: omit, ..SynthSpec::default() };
        let rec = synth_recording(&spec, 0)?;
        println!("{} ({}): {} channels at {} Hz, {:.1} s", rec.subject_id, rec.label.as_str(), rec.n_channels(), rec.fs_hz, rec.duration_s());
        let cfg = PreprocessConfig { ica_reject: Some(vec![]), ..PreprocessConfig::default() };
        let (batch, info) = preprocess_recording(&rec, &cfg)?;
        println!(
            "  -> {} segments of {}x{} at {} Hz; zero-filled {:?}; ICA rank {:?}, kurtosis suggestions {:?}",
            batch.len(),
            batch.channels,
            batch.samples,
            info.output_fs_hz,
            info.zero_filled,
            info.ica_rank,
            info.ica_suggested
        );
        let seg = batch.segment(0);
        let ch = &seg[..batch.samples];
        let mean = ch.iter().sum::<f64>() / ch.len() as f64;
        let sd = (ch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / ch.len() as f64).sqrt();
        println!("  first channel of segment 0 after standardisation: mean {mean:.2e}, sd {sd:.4}");
    }
    Ok(())
}
