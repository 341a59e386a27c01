//! Ten-fold and leave-one-subject-out cross-validation on a synthetic corpus.
//!
//! cargo run --release --example crossval_synthetic -- [separation] [kfold10|loocv] [max_epochs]

use std::time::Instant;

use pdeeg::dataio::{synth_corpus, SynthSpec};
use pdeeg::model::HybridConfig;
use pdeeg::signal::{preprocess_corpus, PreprocessConfig};
use pdeeg::train::{make_kfold, make_loocv, run_crossval, Strategy, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let separation: f64 = args.first().map_or(Ok(2.0), |s| s.parse())?;
    let strategy = args.get(1).and_then(|s| Strategy::parse(s)).unwrap_or(Strategy::Kfold10);
    let max_epochs: usize = args.get(2).map_or(Ok(8), |s| s.parse())?;

    let t0 = Instant::now();
    let spec = SynthSpec { separation, ..SynthSpec::default() };
    let corpus = preprocess_corpus(&synth_corpus(&spec)?, &PreprocessConfig::default())?;
    let batch = corpus.batch;
    println!("{} segments from {} subjects in {:.1?}", batch.len(), corpus.info.len(), t0.elapsed());

    let model = HybridConfig {
        conv_base_width: 4,
        rnn_units: 16,
        attention_nodes: 64,
        fc_nodes: 128,
        ..HybridConfig::default()
    };
    let train = TrainConfig {
        learning_rate: 1e-3,
        max_epochs,
        early_stop_patience: 3,
        seed: 7,
        ..TrainConfig::default()
    };
    let plan = match strategy {
        Strategy::Kfold10 => make_kfold(&batch, 10, 7)?,
        Strategy::Loocv => make_loocv(&batch, 7)?,
    };
    let t1 = Instant::now();
    let cv = run_crossval(&model, &train, &plan, &batch, 1)?;
    for f in &cv.folds {
        println!(
            "fold {:2}: best epoch {} / {}, val acc {:.1}, test acc {:.1}",
            f.fold,
            f.outcome.best_epoch,
            f.outcome.curve.len(),
            f.outcome.best_val_accuracy,
            f.report.metrics.accuracy
        );
    }
    println!("{} in {:.1?}", strategy.as_str(), t1.elapsed());
    println!("pooled segment accuracy {:.2}", cv.segment.metrics.accuracy);
    println!("pooled subject accuracy {:.2}", cv.subject.metrics.accuracy);
    Ok(())
}
