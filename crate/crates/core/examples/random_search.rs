//! Random hyperparameter search over a narrowed space, scored on mean best
//! validation accuracy across folds.
//!
//! cargo run --release --example random_search -- [budget]

use pdeeg::dataio::{synth_corpus, SynthSpec};
use pdeeg::model::HybridConfig;
use pdeeg::signal::{preprocess_corpus, PreprocessConfig};
use pdeeg::train::{make_kfold, random_search, FoldPlan, HyperparamSpace, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let budget: usize = std::env::args().nth(1).map_or(Ok(4), |s| s.parse())?;
    let spec = SynthSpec { n_pd: 5, n_hc: 5, duration_s: 20.0, ..SynthSpec::default() };
    let batch = preprocess_corpus(&synth_corpus(&spec)?, &PreprocessConfig::default())?.batch;
    let base = HybridConfig { conv_base_width: 4, ..HybridConfig::default() };
    let train = TrainConfig { max_epochs: 3, early_stop_patience: 1, seed: 3, ..TrainConfig::default() };
    // small widths keep each trial to seconds; learning rate, batch size and dropout use the full intervals
    let space = HyperparamSpace {
        rnn_units: (16, 32),
        attention_nodes: (64, 96),
        fc_nodes: (128, 160),
        rnn_layers: (1, 2),
        fc_layers: (1, 2),
        ..HyperparamSpace::default()
    };
    let full = make_kfold(&batch, 5, 3)?;
    let plan = FoldPlan { folds: full.folds[..2].to_vec(), ..full };
    let out = random_search(&space, budget, &base, &train, &plan, &batch, 11, 1)?;
    for t in &out.trials {
        println!(
            "trial {}: {} units={} attn={} fc={}x{} lr={:.2e} batch={} dropout={} -> val acc {:.2}, loss {:.4}",
            t.index,
            t.model.arch_name(),
            t.model.rnn_units,
            t.model.attention_nodes,
            t.model.fc_layers,
            t.model.fc_nodes,
            t.train.learning_rate,
            t.train.batch_size,
            t.model.dropout_p,
            t.mean_val_accuracy,
            t.mean_val_loss
        );
    }
    println!("best: trial {}", out.best_trial().index);
    Ok(())
}
