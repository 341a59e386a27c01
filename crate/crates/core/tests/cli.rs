use std::path::{Path, PathBuf};
use std::process::Command;

use pdeeg::dataio::{read_summary, write_recording, CorpusManifest};
use pdeeg::signal::{Diagnosis, Medication, Recording, BIOSEMI32};

const TINY_MODEL: &str = "conv_base_width = 4\nrnn_units = 16\nattention_nodes = 64\nfc_nodes = 128\n\
learning_rate = 0.001\nmax_epochs = 2\nearly_stop_patience = 1\nseed = 3\n";

fn pdeeg(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pdeeg")).args(args).env_remove("PDEEG_DATA_DIR").output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = pdeeg(args);
    assert_eq!(code, 0, "{args:?}\nstdout: {out}\nstderr: {err}");
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Synthesise and preprocess a small corpus; returns the segment directory.
fn tiny_corpus(root: &Path, spec: &str) -> PathBuf {
    std::fs::create_dir_all(root).unwrap();
    let spec = write(root, "spec.toml", spec);
    let raw = root.join("raw");
    let seg = root.join("seg");
    ok(&["synth", "--spec", s(&spec), "--out", s(&raw)]);
    ok(&["preprocess", "--in", s(&raw.join("manifest.json")), "--montage", "biosemi32", "--out", s(&seg)]);
    seg
}

const TINY_SPEC: &str = "n_pd = 3\nn_hc = 3\nduration_s = 8.0\nfs_hz = 512.0\nseed = 4\n";

#[test]
fn synth_is_idempotent_and_creates_dirs() {
    let t = tempfile::tempdir().unwrap();
    let spec = write(t.path(), "spec.toml", "n_pd = 2\nn_hc = 1\nduration_s = 4.0\n");
    let a = t.path().join("deep/nested/a");
    let b = t.path().join("b");
    ok(&["synth", "--spec", s(&spec), "--out", s(&a)]);
    ok(&["synth", "--spec", s(&spec), "--out", s(&b)]);
    let ma = CorpusManifest::load(&a.join("manifest.json")).unwrap();
    let mb = CorpusManifest::load(&b.join("manifest.json")).unwrap();
    assert_eq!(ma.recordings.len(), 3);
    assert_eq!(ma.content_hash, mb.content_hash);
    assert_eq!(std::fs::read(a.join("manifest.json")).unwrap(), std::fs::read(b.join("manifest.json")).unwrap());
}

#[test]
fn preprocess_ui_style_and_500_hz() {
    let t = tempfile::tempdir().unwrap();
    let spec = "n_pd = 1\nn_hc = 1\nduration_s = 6.0\nfs_hz = 500.0\nomit_channels = [\"Pz\"]\n";
    let seg = tiny_corpus(t.path(), spec);
    let summary = read_summary(&seg).unwrap();
    assert_eq!(summary.fs_hz, 256.0);
    assert_eq!(summary.total_segments, 6);
    for r in &summary.recordings {
        assert_eq!(r.input_fs_hz, 500.0);
        assert_eq!(r.output_fs_hz, 256.0);
        assert_eq!(r.zero_filled, vec!["Pz"]);
    }
    // the strict montage refuses the same corpus
    let (code, _, err) = pdeeg(&[
        "preprocess",
        "--in",
        s(&t.path().join("raw/manifest.json")),
        "--montage",
        "biosemi32-strict",
        "--out",
        s(&t.path().join("strict")),
    ]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("Pz"), "{err}");
}

#[test]
fn short_recordings_are_skipped() {
    let t = tempfile::tempdir().unwrap();
    let dir = t.path().join("raw");
    let labels: Vec<String> = BIOSEMI32.iter().map(|s| s.to_string()).collect();
    let mk = |id: &str, n: usize| {
        let rows = (0..32).map(|c| (0..n).map(|i| ((i * (c + 1)) as f64 * 0.01).sin()).collect()).collect();
        Recording::new(id, Diagnosis::Healthy, Medication::NotApplicable, 256.0, labels.clone(), rows).unwrap()
    };
    write_recording(&mk("long", 256 * 5), &dir.join("long.raw")).unwrap();
    write_recording(&mk("short", 256 + 100), &dir.join("short.raw")).unwrap();
    let m = CorpusManifest::from_files(&dir, &["long.raw".into(), "short.raw".into()], "biosemi32").unwrap();
    m.save(&dir.join("manifest.json")).unwrap();
    let (code, _, err) = pdeeg(&["preprocess", "--in", s(&dir.join("manifest.json")), "--out", s(&t.path().join("seg"))]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("skipped short"), "{err}");
    let summary = read_summary(&t.path().join("seg")).unwrap();
    assert_eq!(summary.total_segments, 2);
    assert_eq!(summary.skipped.len(), 1);
}

#[test]
fn crossval_evaluate_roundtrip() {
    let t = tempfile::tempdir().unwrap();
    let seg = tiny_corpus(t.path(), TINY_SPEC);
    let cfg = write(t.path(), "run.toml", TINY_MODEL);
    let out = t.path().join("cv");
    ok(&["crossval", "--data", s(&seg), "--strategy", "kfold10", "--config", s(&cfg), "--out", s(&out)]);
    for f in ["report.json", "plan.json", "best.ckpt", "confusion_segment.csv", "confusion_subject.csv", "curves/fold_00.csv", "folds/fold_09.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let curve = std::fs::read_to_string(out.join("curves/fold_03.csv")).unwrap();
    assert!(curve.starts_with("epoch,train_loss,val_loss\n"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["run"]["model"]["rnn_units"], 16);
    assert_eq!(report["segment"]["confusion"]["tp"].as_u64().unwrap() + report["segment"]["confusion"]["fn"].as_u64().unwrap(), 12);

    // the checkpoint reproduces its own fold's test metrics
    let best = report["best_fold"].as_u64().unwrap();
    let fold: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join(format!("folds/fold_{best:02}.json"))).unwrap()).unwrap();
    let ev = t.path().join("ev");
    ok(&["evaluate", "--checkpoint", s(&out.join("best.ckpt")), "--data", s(&seg), "--plan", s(&out.join("plan.json")), "--out", s(&ev)]);
    let e: serde_json::Value = serde_json::from_slice(&std::fs::read(ev.join("report.json")).unwrap()).unwrap();
    assert_eq!(e["report"]["confusion"], fold["confusion"]);

    // subject level over the whole corpus
    ok(&["evaluate", "--checkpoint", s(&out.join("best.ckpt")), "--data", s(&seg), "--level", "subject", "--out", s(&ev)]);
    let e: serde_json::Value = serde_json::from_slice(&std::fs::read(ev.join("report.json")).unwrap()).unwrap();
    assert_eq!(e["report"]["subjects"].as_array().unwrap().len(), 6);

    // architecture mismatch and a missing checkpoint are errors
    let other = write(t.path(), "other.toml", "rnn_units = 32\nconv_base_width = 4\n");
    let (code, _, _) = pdeeg(&["evaluate", "--checkpoint", s(&out.join("best.ckpt")), "--data", s(&seg), "--config", s(&other), "--out", s(&ev)]);
    assert_ne!(code, 0);
    let (code, _, err) = pdeeg(&["evaluate", "--checkpoint", s(&t.path().join("nope.ckpt")), "--data", s(&seg), "--out", s(&ev)]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn loocv_reports_every_subject() {
    let t = tempfile::tempdir().unwrap();
    let seg = tiny_corpus(t.path(), TINY_SPEC);
    let cfg = write(t.path(), "run.toml", &format!("{TINY_MODEL}max_epochs = 1\n").replace("max_epochs = 2\n", ""));
    let out = t.path().join("loo");
    ok(&["crossval", "--data", s(&seg), "--strategy", "loocv", "--config", s(&cfg), "--out", s(&out)]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["subject"]["subjects"].as_array().unwrap().len(), 6);
    assert_eq!(report["folds"], 6);
}

#[test]
fn single_class_corpus_reports_accuracy_only() {
    let t = tempfile::tempdir().unwrap();
    let train = tiny_corpus(&t.path().join("a"), TINY_SPEC);
    let cfg = write(t.path(), "run.toml", &format!("{TINY_MODEL}max_epochs = 1\n").replace("max_epochs = 2\n", ""));
    let out = t.path().join("cv");
    ok(&["crossval", "--data", s(&train), "--config", s(&cfg), "--out", s(&out)]);
    let pd_only = tiny_corpus(&t.path().join("b"), "n_pd = 2\nn_hc = 0\nduration_s = 4.0\nseed = 9\n");
    let ev = t.path().join("ev");
    ok(&["evaluate", "--checkpoint", s(&out.join("best.ckpt")), "--data", s(&pd_only), "--out", s(&ev)]);
    let e: serde_json::Value = serde_json::from_slice(&std::fs::read(ev.join("report.json")).unwrap()).unwrap();
    let m = &e["report"]["metrics"];
    assert!(m["accuracy"].is_number());
    for k in ["sensitivity", "specificity", "precision", "recall", "f1"] {
        assert!(m[k].is_null(), "{k}");
    }
}

#[test]
fn divergence_exits_with_numerical_code() {
    let t = tempfile::tempdir().unwrap();
    let seg = tiny_corpus(t.path(), TINY_SPEC);
    let cfg = write(t.path(), "run.toml", &TINY_MODEL.replace("learning_rate = 0.001", "learning_rate = 1e308"));
    let (code, _, err) = pdeeg(&["crossval", "--data", s(&seg), "--config", s(&cfg), "--out", s(&t.path().join("cv"))]);
    assert_eq!(code, 4, "{err}");
    assert!(err.contains("fold 0"), "{err}");
}

#[test]
fn ablation_and_search_tables() {
    let t = tempfile::tempdir().unwrap();
    let seg = tiny_corpus(t.path(), TINY_SPEC);
    let cfg = write(t.path(), "run.toml", &format!("{TINY_MODEL}max_epochs = 1\n").replace("max_epochs = 2\n", ""));
    let out = t.path().join("abl");
    ok(&["ablation", "--data", s(&seg), "--config", s(&cfg), "--out", s(&out)]);
    let csv = std::fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6, "{csv}");

    let space = write(
        t.path(),
        "space.toml",
        "conv_arch = [\"vgg13\"]\nrnn_layers = [1, 1]\nrnn_units = [16, 24]\nattention_nodes = [64, 80]\nfc_layers = [1, 1]\nfc_nodes = [128, 160]\n",
    );
    let out = t.path().join("search");
    ok(&["search", "--data", s(&seg), "--config", s(&cfg), "--budget", "3", "--folds", "2", "--space", s(&space), "--out", s(&out)]);
    let csv = std::fs::read_to_string(out.join("trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4, "{csv}");
}

#[test]
fn gradcheck_on_a_compact_model() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "m.toml", "conv_base_width = 4\nrnn_units = 16\nattention_nodes = 64\nfc_nodes = 128\n");
    let out = ok(&["gradcheck", "--config", s(&cfg), "--params", "12"]);
    assert!(out.contains("model VGG13-BiGRU-Attn"), "{out}");
    assert!(!out.contains("FAIL"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(pdeeg(&["crossval", "--bogus"]).0, 2);
    assert_eq!(pdeeg(&["nope"]).0, 2);
    let t = tempfile::tempdir().unwrap();
    let bad = write(t.path(), "bad.toml", "no_such_key = 1\n");
    let (code, _, err) = pdeeg(&["crossval", "--data", "x", "--config", s(&bad), "--out", "y"]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("no_such_key"));
    // --data falls back to the environment, and fails as data when absent
    let out = Command::new(env!("CARGO_BIN_EXE_pdeeg"))
        .args(["crossval", "--out", s(&t.path().join("o"))])
        .env("PDEEG_DATA_DIR", t.path().join("missing"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let help = pdeeg(&["crossval", "--help"]).1;
    for flag in ["--data", "--strategy", "--config", "--out", "--jobs", "--seed"] {
        assert!(help.contains(flag), "{flag}");
    }
}
