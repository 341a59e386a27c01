//! Mix a slow sine, a square wave and sparse blink-like spikes into four
//! channels, unmix with FastICA, and remove the spiky component.
//!
//! cargo run --release --example fastica_unmix

use std::f64::consts::PI;

use pdeeg::signal::{fastica, remove_components, Diagnosis, IcaConfig, Medication, Recording};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fs = 256.0;
    let n = 256 * 20;
    let sine: Vec<f64> = (0..n).map(|i| (2.0 * PI * 3.0 * i as f64 / fs).sin()).collect();
    let square: Vec<f64> = (0..n).map(|i| if (i as f64 / fs * 7.0).fract() < 0.5 { 1.0 } else { -1.0 }).collect();
    let blink: Vec<f64> = (0..n).map(|i| if i % 900 < 40 { 6.0 * (PI * (i % 900) as f64 / 40.0).sin() } else { 0.0 }).collect();
    let mixing = [[1.0, 0.5, 0.9], [0.3, 1.0, 0.7], [-0.6, 0.4, 1.1], [0.8, -0.5, 0.2]];
    let rows: Vec<Vec<f64>> = mixing
        .iter()
        .map(|m| (0..n).map(|t| m[0] * sine[t] + m[1] * square[t] + m[2] * blink[t]).collect())
        .collect();
    let labels = ["Fp1", "Fp2", "Cz", "Pz"].iter().map(|s| s.to_string()).collect();
    let rec = Recording::new("demo", Diagnosis::Healthy, Medication::NotApplicable, fs, labels, rows)?;

    let d = fastica(&rec, &IcaConfig { seed: 2, ..Default::default() })?;
    println!("rank {}, {} components", d.rank, d.n_components());
    let kurt = d.kurtosis();
    for (k, row) in d.sources.row_iter().enumerate() {
        let s: Vec<f64> = row.iter().copied().collect();
        let c = |r: &[f64]| {
            let (ms, mr) = (s.iter().sum::<f64>() / n as f64, r.iter().sum::<f64>() / n as f64);
            let num: f64 = s.iter().zip(r).map(|(a, b)| (a - ms) * (b - mr)).sum();
            let den = (s.iter().map(|a| (a - ms).powi(2)).sum::<f64>() * r.iter().map(|b| (b - mr).powi(2)).sum::<f64>()).sqrt();
            (num / den).abs()
        };
        println!("component {k}: kurtosis {:6.2}  |corr| sine {:.3} square {:.3} blink {:.3}", kurt[k], c(&sine), c(&square), c(&blink));
    }
    let reject = d.suggest_rejections(5.0);
    println!("kurtosis > 5 suggests rejecting {reject:?}");
    let clean = remove_components(&rec, &d, &reject)?;
    let peak = |r: &Recording| r.samples[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("Fp1 peak amplitude {:.2} -> {:.2}", peak(&rec), peak(&clean));
    Ok(())
}
