//! Cross-validate the five architectures under one fold plan and seed.
//!
//! cargo run --release --example ablation_ladder -- [n_subjects_per_class] [max_epochs]

use pdeeg::dataio::{synth_corpus, SynthSpec};
use pdeeg::model::HybridConfig;
use pdeeg::signal::{preprocess_corpus, PreprocessConfig};
use pdeeg::train::{make_kfold, run_ablation, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let per_class: usize = args.first().map_or(Ok(6), |s| s.parse())?;
    let max_epochs: usize = args.get(1).map_or(Ok(5), |s| s.parse())?;
    let spec = SynthSpec { n_pd: per_class, n_hc: per_class, duration_s: 30.0, ..SynthSpec::default() };
    let batch = preprocess_corpus(&synth_corpus(&spec)?, &PreprocessConfig::default())?.batch;
    let base = HybridConfig { conv_base_width: 4, rnn_units: 16, attention_nodes: 64, fc_nodes: 128, ..HybridConfig::default() };
    let train = TrainConfig { learning_rate: 1e-3, max_epochs, early_stop_patience: 2, seed: 7, ..TrainConfig::default() };
    let plan = make_kfold(&batch, 10, 7)?;
    let rows = run_ablation(&base, &train, &plan, &batch, 1)?;
    println!("{:<20} {:>8} {:>8} {:>8} {:>8} {:>10}", "architecture", "acc", "sens", "spec", "subj", "params");
    let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
    for r in rows {
        println!(
            "{:<20} {:>8.2} {:>8} {:>8} {:>8.2} {:>10}",
            r.architecture,
            r.segment.accuracy,
            f(r.segment.sensitivity),
            f(r.segment.specificity),
            r.subject.accuracy,
            r.parameters
        );
    }
    Ok(())
}
