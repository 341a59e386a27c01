//! Build a small loss on the tape, backpropagate, and compare against
//! central differences; then run the per-op suite.
//!
//! cargo run --release --example gradcheck_ops

use pdeeg::autodiff::gradcheck::{check, op_suite, GradCheckConfig};
use pdeeg::autodiff::{Tape, Tensor, BCE_EPS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // logistic regression: bce(sigmoid(x W^T + b), y)
    let x = Tensor::new(vec![4, 3], vec![0.5, -1.0, 2.0, 0.1, 0.3, -0.7, -1.2, 0.8, 0.4, 1.5, -0.2, -0.9])?;
    let w = Tensor::new(vec![1, 3], vec![0.2, -0.4, 0.1])?;
    let b = Tensor::new(vec![1], vec![0.05])?;
    let y = [1.0, 0.0, 1.0, 0.0];

    let f = |t: &mut Tape, v: &[pdeeg::autodiff::Var]| {
        let z = t.linear(v[0], v[1], Some(v[2]))?;
        let z = t.reshape(z, &[4])?;
        let p = t.sigmoid(z);
        t.bce_loss(p, &y, BCE_EPS)
    };
    let mut tape = Tape::new();
    let vars: Vec<_> = [&x, &w, &b].iter().map(|t| tape.leaf((*t).clone())).collect();
    let loss = f(&mut tape, &vars)?;
    println!("loss = {:.6}", tape.value(loss).item());
    let grads = tape.backward(loss)?;
    println!("dL/dW = {:?}", grads.get(vars[1]).unwrap());
    println!("dL/db = {:?}", grads.get(vars[2]).unwrap());

    let r = check(&[x, w, b], f, &GradCheckConfig::default(), None)?;
    println!("{} elements checked, max rel error {:.2e}, passed {}", r.checked, r.max_rel_error, r.passed());

    println!("\nop suite:");
    for (name, r) in op_suite(0)? {
        println!("  {name:<16} {:>4} checks  max rel {:.2e}  {}", r.checked, r.max_rel_error, if r.passed() { "ok" } else { "FAIL" });
    }
    Ok(())
}
