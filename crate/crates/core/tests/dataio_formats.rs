use std::io::Write;

use pdeeg::dataio::*;
use pdeeg::signal::{Diagnosis, Medication, Recording};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn random_recording(seed: u64, c: usize, n: usize) -> Recording {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Recording::new(
        "sub-07",
        Diagnosis::Parkinsons,
        Medication::Off,
        512.0,
        (0..c).map(|i| format!("E{i}")).collect(),
        (0..c).map(|_| (0..n).map(|_| rng.random_range(-100.0..100.0)).collect()).collect(),
    )
    .unwrap()
}

#[test]
fn raw_round_trip_is_bitwise_at_f32() {
    let dir = tempfile::tempdir().unwrap();
    let rec = random_recording(1, 5, 777);
    let p = dir.path().join("a.raw");
    write_recording(&rec, &p).unwrap();
    let back = read_recording(&p).unwrap();
    assert_eq!(back.subject_id, rec.subject_id);
    assert_eq!(back.label, rec.label);
    assert_eq!(back.medication, rec.medication);
    assert_eq!(back.channel_labels, rec.channel_labels);
    for (a, b) in back.samples.iter().zip(&rec.samples) {
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.to_bits(), ((*y as f32) as f64).to_bits());
        }
    }
    // second write of the read-back recording gives identical bytes
    let p2 = dir.path().join("b.raw");
    write_recording(&back, &p2).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
}

#[test]
fn truncated_payload_names_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.raw");
    write_recording(&random_recording(2, 2, 10), &p).unwrap();
    let mut bytes = std::fs::read(&p).unwrap();
    bytes.truncate(bytes.len() - 6);
    std::fs::write(&p, &bytes).unwrap();
    match read_recording(&p) {
        Err(DataError::Truncated { expected, actual, .. }) => {
            assert_eq!(expected, 80);
            assert_eq!(actual, 74);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_version_and_bad_magic() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.raw");
    write_recording(&random_recording(3, 1, 4), &p).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header = std::str::from_utf8(&bytes[12..12 + hlen]).unwrap().replace("\"format_version\":1", "\"format_version\":9");
    let mut out = bytes[..8].to_vec();
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&bytes[12 + hlen..]);
    std::fs::write(&p, &out).unwrap();
    assert!(matches!(read_recording(&p), Err(DataError::Version { found: 9, .. })));

    std::fs::write(&p, b"NOTEEG..........").unwrap();
    assert!(matches!(read_recording(&p), Err(DataError::BadMagic { .. })));
}

#[test]
fn bad_label_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.raw");
    write_recording(&random_recording(3, 1, 4), &p).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header = std::str::from_utf8(&bytes[12..12 + hlen]).unwrap().replace("\"label\":\"PD\"", "\"label\":\"XX\"");
    let mut out = bytes[..8].to_vec();
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&bytes[12 + hlen..]);
    std::fs::write(&p, &out).unwrap();
    assert!(matches!(read_recording(&p), Err(DataError::Header { .. })));
}

fn meta() -> CsvMetadata {
    CsvMetadata {
        subject_id: "csv1".into(),
        label: Diagnosis::Healthy,
        medication: Medication::NotApplicable,
    }
}

#[test]
fn csv_two_columns_four_rows() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.csv");
    std::fs::write(&p, "Fz,Cz\n1,2\n3,4\n5.5,-6\n7,8e-1\n").unwrap();
    let r = import_csv(&p, 256.0, &meta()).unwrap();
    assert_eq!(r.n_channels(), 2);
    assert_eq!(r.n_samples(), 4);
    assert_eq!(r.samples[1], vec![2.0, 4.0, -6.0, 0.8]);

    // csv → raw → values equal within f32 precision
    let raw = dir.path().join("x.raw");
    write_recording(&r, &raw).unwrap();
    let back = read_recording(&raw).unwrap();
    for (a, b) in back.samples.iter().flatten().zip(r.samples.iter().flatten()) {
        assert!((a - b).abs() <= b.abs() * f32::EPSILON as f64);
    }
}

#[test]
fn csv_errors_carry_row_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("h.csv");
    std::fs::write(&p, "Fz,Cz\n").unwrap();
    assert!(import_csv(&p, 256.0, &meta()).is_err());

    std::fs::write(&p, "Fz,Cz\n1,2\n3\n").unwrap();
    assert!(matches!(import_csv(&p, 256.0, &meta()), Err(DataError::Csv { row: 3, .. })));

    let mut f = std::fs::File::create(&p).unwrap();
    writeln!(f, "Fz,Cz\n1,2\n3,4\n5,abc").unwrap();
    assert!(matches!(import_csv(&p, 256.0, &meta()), Err(DataError::Csv { row: 4, .. })));
}

fn band_power(x: &[f64], fs: f64, lo: f64, hi: f64) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    rustfft::FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    (1..n / 2)
        .filter(|&k| {
            let f = k as f64 * fs / n as f64;
            f >= lo && f < hi
        })
        .map(|k| buf[k].norm_sqr())
        .sum::<f64>()
        / (n * n) as f64
}

fn subject_band_power(r: &Recording, lo: f64, hi: f64) -> f64 {
    r.samples.iter().map(|row| band_power(row, r.fs_hz, lo, hi)).sum::<f64>() / r.n_channels() as f64
}

fn welch_p(a: &[f64], b: &[f64]) -> f64 {
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let var = |x: &[f64], m: f64| x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (var(a, ma) / a.len() as f64, var(b, mb) / b.len() as f64);
    let t = (ma - mb) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()))
}

#[test]
fn synth_separation_one_is_indistinguishable() {
    let spec = SynthSpec {
        n_pd: 25,
        n_hc: 25,
        duration_s: 20.0,
        fs_hz: 256.0,
        seed: 11,
        separation: 1.0,
        ..Default::default()
    };
    let corpus = synth_corpus(&spec).unwrap();
    for (lo, hi) in [(13.0, 30.0), (8.0, 13.0)] {
        let pd: Vec<f64> = corpus[..25].iter().map(|r| subject_band_power(r, lo, hi)).collect();
        let hc: Vec<f64> = corpus[25..].iter().map(|r| subject_band_power(r, lo, hi)).collect();
        let p = welch_p(&pd, &hc);
        assert!(p > 0.01, "band {lo}-{hi}: p = {p}");
    }
}

#[test]
fn synth_separation_two_raises_beta() {
    let spec = SynthSpec {
        n_pd: 5,
        n_hc: 5,
        duration_s: 20.0,
        fs_hz: 256.0,
        seed: 3,
        separation: 2.0,
        ..Default::default()
    };
    let corpus = synth_corpus(&spec).unwrap();
    let m = |rs: &[Recording], lo, hi| rs.iter().map(|r| subject_band_power(r, lo, hi)).sum::<f64>() / rs.len() as f64;
    let ratio = m(&corpus[..5], 13.0, 30.0) / m(&corpus[5..], 13.0, 30.0);
    assert!(ratio >= 1.5, "beta ratio {ratio}");
    assert!(m(&corpus[..5], 8.0, 13.0) < m(&corpus[5..], 8.0, 13.0));
}

#[test]
fn synth_corpus_hash_is_deterministic_and_sensitive() {
    let spec = SynthSpec {
        n_pd: 2,
        n_hc: 2,
        duration_s: 4.0,
        fs_hz: 500.0,
        omit_channels: vec!["Pz".into()],
        ..Default::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = synth_generate(&spec, a.path()).unwrap();
    let mb = synth_generate(&spec, b.path()).unwrap();
    assert_eq!(ma.content_hash, mb.content_hash);
    assert_eq!(ma.recordings.len(), 4);
    assert_eq!(ma.recordings[0].n_channels, 31);
    assert_eq!(ma.recordings[0].fs_hz, 500.0);
    ma.verify(a.path()).unwrap();
    let loaded = CorpusManifest::load(&a.path().join("manifest.json")).unwrap();
    assert_eq!(loaded, ma);

    // flip one payload byte
    let f = a.path().join(&ma.recordings[1].path);
    let mut bytes = std::fs::read(&f).unwrap();
    let last = bytes.len() - 3;
    bytes[last] ^= 0x01;
    std::fs::write(&f, &bytes).unwrap();
    assert!(matches!(ma.verify(a.path()), Err(DataError::Hash { .. })));
    let rebuilt = CorpusManifest::from_files(a.path(), &ma.recordings.iter().map(|e| e.path.clone()).collect::<Vec<_>>(), "biosemi32").unwrap();
    assert_ne!(rebuilt.content_hash, ma.content_hash);

    let other = SynthSpec { seed: 8, ..spec };
    let c = tempfile::tempdir().unwrap();
    assert_ne!(synth_generate(&other, c.path()).unwrap().content_hash, mb.content_hash);
}

#[test]
fn synth_spec_validation() {
    assert!(synth_corpus(&SynthSpec { n_pd: 0, n_hc: 0, ..Default::default() }).is_err());
    assert_eq!(synth_corpus(&SynthSpec { n_hc: 0, n_pd: 2, duration_s: 4.0, ..Default::default() }).unwrap().len(), 2);
    assert!(synth_corpus(&SynthSpec { duration_s: 1.0, ..Default::default() }).is_err());
}

#[test]
fn segments_round_trip() {
    use pdeeg::signal::*;
    let spec = SynthSpec { n_pd: 1, n_hc: 1, duration_s: 4.0, fs_hz: 256.0, ..Default::default() };
    let cfg = PreprocessConfig::default();
    let mut batch = SegmentBatch::empty(MontageSpec::biosemi32().canonical_labels, 512);
    let mut infos = Vec::new();
    for r in synth_corpus(&spec).unwrap() {
        let (b, info) = preprocess_recording(&r, &cfg).unwrap();
        batch.extend(&b).unwrap();
        infos.push(info);
    }
    assert_eq!(batch.len(), 4);
    let summary = SegmentSummary {
        fs_hz: 256.0,
        channels: 32,
        samples_per_segment: 512,
        total_segments: 4,
        standardized: true,
        recordings: infos,
        skipped: vec![],
    };
    let dir = tempfile::tempdir().unwrap();
    write_segments(&batch, &summary, dir.path()).unwrap();
    let back = read_segments(dir.path()).unwrap();
    assert_eq!(back.labels, batch.labels);
    assert_eq!(back.subject_ids, batch.subject_ids);
    for (a, b) in back.data.iter().zip(&batch.data) {
        assert_eq!(*a, (*b as f32) as f64);
    }
    assert_eq!(read_summary(dir.path()).unwrap(), summary);
}
