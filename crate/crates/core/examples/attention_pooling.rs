//! Additive attention over a sequence of recurrent states: weights are a
//! softmax over time and the context is their weighted sum.
//!
//! cargo run --release --example attention_pooling

use pdeeg::autodiff::{Tape, Tensor};
use pdeeg::model::{HybridConfig, HybridModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = HybridConfig {
        conv_base_width: 4,
        rnn_units: 16,
        attention_nodes: 64,
        fc_nodes: 128,
        ..HybridConfig::default()
    };
    let model = HybridModel::new(cfg, 3)?;
    let (t, width) = (16, model.config.rnn_output_width());
    // one state per step; step 5 stands out
    let states = Tensor::from_fn(&[1, t, width], |i| {
        let step = i / width;
        if step == 5 {
            2.0
        } else {
            0.05 * ((i % 7) as f64 - 3.0)
        }
    });
    let mut tape = Tape::new();
    let vars = model.bind_constants(&mut tape);
    let s = tape.constant(states);
    let (context, weights) = model.attention(&mut tape, &vars, s)?;
    let w = tape.value(weights).data();
    for (i, a) in w.iter().enumerate() {
        println!("step {i:2}  weight {a:.4}  {}", "#".repeat((a * 200.0) as usize));
    }
    println!("sum of weights {:.15}", w.iter().sum::<f64>());
    println!("context shape {:?}", tape.shape(context));
    Ok(())
}
