//! Rational polyphase resampling of 500 Hz and 512 Hz recordings to 256 Hz.
//!
//! cargo run --release --example resample_polyphase

use std::f64::consts::PI;

use pdeeg::signal::{resample, Diagnosis, Medication, Recording};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for fs in [500.0, 512.0] {
        let n = (fs * 4.0) as usize;
        let mix = |i: usize| {
            let t = i as f64 / fs;
            (2.0 * PI * 10.0 * t).sin() + 0.5 * (2.0 * PI * 120.0 * t).sin()
        };
        let rec = Recording::new(
            "demo",
            Diagnosis::Healthy,
            Medication::NotApplicable,
            fs,
            vec!["Cz".into()],
            vec![(0..n).map(mix).collect()],
        )?;
        let out = resample(&rec, 256.0)?;
        let y = &out.samples[0];
        // compare against the 10 Hz component alone; the 120 Hz part is above the anti-alias cutoff
        let truth: Vec<f64> = (0..y.len()).map(|i| (2.0 * PI * 10.0 * i as f64 / 256.0).sin()).collect();
        let mid = y.len() / 4..3 * y.len() / 4;
        let err = y[mid.clone()].iter().zip(&truth[mid]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (y.len() / 2) as f64;
        println!("{fs} Hz: {n} -> {} samples at {} Hz; interior RMS error vs 10 Hz tone {:.4}", y.len(), out.fs_hz, err.sqrt());
    }
    Ok(())
}
