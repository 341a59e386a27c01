//! Recurrent cells built from tape primitives.
//!
//! Gate blocks are stacked along the first weight axis: GRU uses
//! `[update, reset, candidate]`, LSTM uses `[input, forget, cell, output]`.

use super::{AutodiffError, Tape, Var};

type Result<T> = std::result::Result<T, AutodiffError>;

/// Tape handles for one GRU direction.
#[derive(Copy, Clone, Debug)]
pub struct GruVars {
    /// `[3H, D_in]`
    pub w_input: Var,
    /// `[3H, H]`
    pub w_hidden: Var,
    /// `[3H]`
    pub bias: Var,
}

/// Tape handles for one LSTM direction.
#[derive(Copy, Clone, Debug)]
pub struct LstmVars {
    /// `[4H, D_in]`
    pub w_input: Var,
    /// `[4H, H]`
    pub w_hidden: Var,
    /// `[4H]`
    pub bias: Var,
}

fn hidden_size(tape: &Tape, w_hidden: Var, gates: usize, op: &'static str) -> Result<usize> {
    let s = tape.shape(w_hidden);
    if s.len() != 2 || s[0] != gates * s[1] {
        return Err(AutodiffError::InvalidArgument {
            op,
            reason: format!("hidden weight shape {s:?} is not [{gates}H, H]"),
        });
    }
    Ok(s[1])
}

/// One GRU update:
/// `z = σ(Wz x + Uz h + bz)`, `r = σ(Wr x + Ur h + br)`,
/// `n = tanh(Wn x + r ⊙ (Un h) + bn)`, `h' = (1 − z) ⊙ n + z ⊙ h`.
pub fn gru_cell(tape: &mut Tape, x_t: Var, h_prev: Var, p: &GruVars) -> Result<Var> {
    let gx = tape.linear(x_t, p.w_input, Some(p.bias))?;
    gru_step(tape, gx, h_prev, p.w_hidden)
}

/// GRU update from a precomputed input projection `gx = W x + b` of shape `[B, 3H]`.
pub fn gru_step(tape: &mut Tape, gx: Var, h_prev: Var, w_hidden: Var) -> Result<Var> {
    let h = hidden_size(tape, w_hidden, 3, "gru_cell")?;
    if tape.shape(gx).last() != Some(&(3 * h)) {
        return Err(AutodiffError::ShapeMismatch {
            op: "gru_cell",
            dim: "input projection".into(),
            expected: 3 * h,
            actual: *tape.shape(gx).last().unwrap(),
        });
    }
    let gh = tape.linear(h_prev, w_hidden, None)?;
    let xz = tape.slice_last(gx, 0, h)?;
    let hz = tape.slice_last(gh, 0, h)?;
    let xr = tape.slice_last(gx, h, h)?;
    let hr = tape.slice_last(gh, h, h)?;
    let xn = tape.slice_last(gx, 2 * h, h)?;
    let hn = tape.slice_last(gh, 2 * h, h)?;
    let z = tape.add(xz, hz)?;
    let z = tape.sigmoid(z);
    let r = tape.add(xr, hr)?;
    let r = tape.sigmoid(r);
    let rn = tape.mul(r, hn)?;
    let n = tape.add(xn, rn)?;
    let n = tape.tanh(n);
    // n + z ⊙ (h − n)
    let diff = tape.sub(h_prev, n)?;
    let zd = tape.mul(z, diff)?;
    tape.add(n, zd)
}

/// One LSTM update, returning `(h, c)`.
pub fn lstm_cell(tape: &mut Tape, x_t: Var, h_prev: Var, c_prev: Var, p: &LstmVars) -> Result<(Var, Var)> {
    let gx = tape.linear(x_t, p.w_input, Some(p.bias))?;
    lstm_step(tape, gx, h_prev, c_prev, p.w_hidden)
}

/// LSTM update from a precomputed input projection of shape `[B, 4H]`.
pub fn lstm_step(tape: &mut Tape, gx: Var, h_prev: Var, c_prev: Var, w_hidden: Var) -> Result<(Var, Var)> {
    let h = hidden_size(tape, w_hidden, 4, "lstm_cell")?;
    let gh = tape.linear(h_prev, w_hidden, None)?;
    let pre = tape.add(gx, gh)?;
    let i = tape.slice_last(pre, 0, h)?;
    let i = tape.sigmoid(i);
    let f = tape.slice_last(pre, h, h)?;
    let f = tape.sigmoid(f);
    let g = tape.slice_last(pre, 2 * h, h)?;
    let g = tape.tanh(g);
    let o = tape.slice_last(pre, 3 * h, h)?;
    let o = tape.sigmoid(o);
    let fc = tape.mul(f, c_prev)?;
    let ig = tape.mul(i, g)?;
    let c = tape.add(fc, ig)?;
    let tc = tape.tanh(c);
    let h_new = tape.mul(o, tc)?;
    Ok((h_new, c))
}
