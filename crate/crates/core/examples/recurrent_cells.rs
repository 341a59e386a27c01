//! Step a GRU and an LSTM cell through a short sequence and print the
//! hidden-state trajectory.
//!
//! cargo run --release --example recurrent_cells

use pdeeg::autodiff::{gru_cell, lstm_cell, GruVars, LstmVars, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const D: usize = 3;
const H: usize = 4;
const T: usize = 6;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut rand = |shape: &[usize]| Tensor::from_fn(shape, |_| rng.random_range(-0.5..0.5));
    let xs: Vec<Tensor> = (0..T).map(|_| rand(&[1, D])).collect();

    let mut tape = Tape::new();
    let gru = GruVars {
        w_input: tape.leaf(rand(&[3 * H, D])),
        w_hidden: tape.leaf(rand(&[3 * H, H])),
        bias: tape.leaf(Tensor::zeros(&[3 * H])),
    };
    let lstm = LstmVars {
        w_input: tape.leaf(rand(&[4 * H, D])),
        w_hidden: tape.leaf(rand(&[4 * H, H])),
        bias: tape.leaf(Tensor::zeros(&[4 * H])),
    };
    let mut h_g = tape.constant(Tensor::zeros(&[1, H]));
    let mut h_l = tape.constant(Tensor::zeros(&[1, H]));
    let mut c_l = tape.constant(Tensor::zeros(&[1, H]));
    println!("{:>2}  {:<40} {:<40}", "t", "GRU h", "LSTM h");
    for (t, x) in xs.into_iter().enumerate() {
        let xv = tape.constant(x);
        h_g = gru_cell(&mut tape, xv, h_g, &gru)?;
        (h_l, c_l) = lstm_cell(&mut tape, xv, h_l, c_l, &lstm)?;
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:+.4}")).collect::<Vec<_>>().join(" ");
        println!("{t:>2}  {:<40} {:<40}", fmt(tape.value(h_g).data()), fmt(tape.value(h_l).data()));
    }
    // gradient of the final GRU state sum with respect to its recurrent weights
    let s = tape.sum(h_g);
    let g = tape.backward(s)?;
    let gw = g.get(gru.w_hidden).unwrap();
    println!("|dL/dW_hh| (GRU) = {:.5}", gw.iter().map(|v| v * v).sum::<f64>().sqrt());
    Ok(())
}
