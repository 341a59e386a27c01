//! Generate a small synthetic corpus on disk, preprocess it, train one
//! split, and round-trip the model through a checkpoint file.
//!
//! cargo run --release --example synth_and_checkpoint

use pdeeg::dataio::{synth_generate, CorpusManifest, SynthSpec};
use pdeeg::model::{load_checkpoint, save_checkpoint, HybridConfig};
use pdeeg::signal::{preprocess_corpus, PreprocessConfig};
use pdeeg::train::{evaluate, make_kfold, train_fold, Level, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("pdeeg-synth-demo");
    let spec = SynthSpec { n_pd: 4, n_hc: 4, duration_s: 20.0, ..SynthSpec::default() };
    let manifest = synth_generate(&spec, &dir)?;
    println!("{} recordings in {}, corpus hash {}", manifest.recordings.len(), dir.display(), &manifest.content_hash[..16]);

    let m = CorpusManifest::load(&dir.join("manifest.json"))?;
    let recs = m.load_recordings(&dir)?;
    let batch = preprocess_corpus(&recs, &PreprocessConfig::default())?.batch;
    println!("{} segments", batch.len());

    let model_cfg = HybridConfig { conv_base_width: 4, rnn_units: 16, attention_nodes: 64, fc_nodes: 128, ..HybridConfig::default() };
    let train_cfg = TrainConfig { learning_rate: 1e-3, max_epochs: 6, early_stop_patience: 2, seed: 1, ..TrainConfig::default() };
    let plan = make_kfold(&batch, 5, 1)?;
    let fold = &plan.folds[0];
    let out = train_fold(&model_cfg, &train_cfg, &batch.select(&fold.train), &batch.select(&fold.val))?;
    for e in &out.curve {
        println!("epoch {}: train {:.4} val {:.4} acc {:.1}", e.epoch, e.train_loss, e.val_loss, e.val_accuracy);
    }
    let test = batch.select(&fold.test);
    let before = evaluate(&out.model, &test, Level::Segment, 0.5, 64)?;

    let path = dir.join("demo.ckpt");
    save_checkpoint(&out.model, &serde_json::json!({ "best_epoch": out.best_epoch }), &path)?;
    let ck = load_checkpoint(&path, Some(&model_cfg))?;
    let after = evaluate(&ck.model, &test, Level::Segment, 0.5, 64)?;
    println!("test accuracy {:.2} before save, {:.2} after load; metadata {}", before.metrics.accuracy, after.metrics.accuracy, ck.metadata);
    Ok(())
}
