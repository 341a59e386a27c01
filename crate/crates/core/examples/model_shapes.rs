//! Per-stage tensor shapes and parameter counts for the default model and
//! the five ablation architectures.
//!
//! cargo run --release --example model_shapes

use pdeeg::autodiff::{Tape, Tensor};
use pdeeg::model::{HybridConfig, HybridModel};
use pdeeg::train::ablation_ladder;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = HybridModel::new(HybridConfig::default(), 0)?;
    println!("{}: {} parameters", model.config.arch_name(), model.parameter_count());
    let mut tape = Tape::new();
    let vars = model.bind_constants(&mut tape);
    let x = tape.constant(Tensor::from_fn(&[2, 32, 512], |i| ((i % 13) as f64 - 6.0) / 6.0));
    let tr = model.forward(&mut tape, &vars, x, false, &mut ChaCha8Rng::seed_from_u64(0))?;
    println!("  input     {:?}", tape.shape(x));
    println!("  encoded   {:?}", tape.shape(tr.encoded));
    if let Some(s) = tr.states {
        println!("  states    {:?}", tape.shape(s));
    }
    if let Some(a) = tr.attention {
        println!("  attention {:?}", tape.shape(a));
    }
    println!("  context   {:?}", tape.shape(tr.context));
    println!("  probs     {:?} = {:?}", tape.shape(tr.probs), tape.value(tr.probs).data());

    println!("\nlargest parameter tensors:");
    let mut shapes = model.shapes();
    shapes.sort_by_key(|(_, s)| std::cmp::Reverse(s.iter().product::<usize>()));
    for (name, s) in shapes.iter().take(6) {
        println!("  {name:<28} {s:?}");
    }

    println!("\nablation ladder:");
    for cfg in ablation_ladder(&HybridConfig::default()) {
        let m = HybridModel::new(cfg, 0)?;
        println!("  {:<20} {:>9} parameters", m.config.arch_name(), m.parameter_count());
    }
    Ok(())
}
