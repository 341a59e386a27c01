//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc low-pass.

use super::{Recording, SignalError};

/// Anti-alias cutoff as a fraction of the output Nyquist frequency.
pub const ROLLOFF: f64 = 0.8;
/// Kaiser window shape parameter.
pub const KAISER_BETA: f64 = 8.0;
/// Filter half-length in units of `max(up, down)` taps at the upsampled rate.
const HALF_LEN_FACTOR: usize = 32;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Reduced ratio `(up, down)` for integer rates.
pub fn ratio(fs_in: f64, fs_out: f64) -> Result<(usize, usize), SignalError> {
    let is_int = |f: f64| f.is_finite() && f > 0.0 && f.fract() == 0.0;
    if !is_int(fs_in) || !is_int(fs_out) {
        return Err(SignalError::Resample(format!(
            "rates must be positive integers, got {fs_in} -> {fs_out}"
        )));
    }
    if fs_out > fs_in {
        return Err(SignalError::Resample(format!("upsampling {fs_in} -> {fs_out} Hz is not supported")));
    }
    let (a, b) = (fs_out as u64, fs_in as u64);
    let g = gcd(a, b);
    Ok(((a / g) as usize, (b / g) as usize))
}

/// Prototype low-pass at the upsampled rate, centred at index `half`.
fn design(up: usize, down: usize) -> (Vec<f64>, usize) {
    let m = up.max(down);
    let half = HALF_LEN_FACTOR * m;
    // cycles per upsampled sample
    let fc = ROLLOFF / (2.0 * m as f64);
    let i0b = bessel_i0(KAISER_BETA);
    let mut h: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let n = i as f64 - half as f64;
            let arg = 2.0 * fc * n;
            let sinc = if n == 0.0 {
                1.0
            } else {
                (std::f64::consts::PI * arg).sin() / (std::f64::consts::PI * arg)
            };
            let r = n / half as f64;
            let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0b;
            2.0 * fc * sinc * w
        })
        .collect();
    // unit DC gain for every polyphase branch (taps sharing a residue mod `up`)
    for r in 0..up {
        let s: f64 = h.iter().skip(r).step_by(up).sum();
        h.iter_mut().skip(r).step_by(up).for_each(|v| *v /= s);
    }
    (h, half)
}

/// Resample one channel by `up/down`. Output length is `round(n·up/down)`.
pub fn resample_signal(x: &[f64], up: usize, down: usize) -> Vec<f64> {
    if up == down {
        return x.to_vec();
    }
    let n = x.len();
    let n_out = ((n * up) as f64 / down as f64).round() as usize;
    if n == 0 || n_out == 0 {
        return Vec::new();
    }
    let (h, half) = design(up, down);
    // odd reflection beyond both ends keeps the edges free of step artifacts
    let at = |k: isize| -> f64 {
        if k < 0 {
            let j = ((-k) as usize).min(n - 1);
            2.0 * x[0] - x[j]
        } else if k as usize >= n {
            let j = (2 * (n - 1)).saturating_sub(k as usize);
            2.0 * x[n - 1] - x[j]
        } else {
            x[k as usize]
        }
    };
    let mut y = Vec::with_capacity(n_out);
    for j in 0..n_out {
        // position of output j on the upsampled grid
        let t = (j * down) as isize;
        let (u, hl) = (up as isize, half as isize);
        let lo = (t - hl + u - 1).div_euclid(u);
        let hi = (t + hl).div_euclid(u);
        let mut acc = 0.0;
        for k in lo..=hi {
            acc += h[(t - k * u + hl) as usize] * at(k);
        }
        y.push(acc);
    }
    y
}

/// Resample every channel to `target_hz` (downsampling only).
pub fn resample(rec: &Recording, target_hz: f64) -> Result<Recording, SignalError> {
    let (up, down) = ratio(rec.fs_hz, target_hz)?;
    let rows = rec.samples.iter().map(|r| resample_signal(r, up, down)).collect();
    Ok(rec.with_samples(target_hz, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios() {
        assert_eq!(ratio(500.0, 256.0).unwrap(), (64, 125));
        assert_eq!(ratio(512.0, 256.0).unwrap(), (1, 2));
        assert_eq!(ratio(256.0, 256.0).unwrap(), (1, 1));
        assert!(ratio(128.0, 256.0).is_err());
        assert!(ratio(500.5, 256.0).is_err());
    }

    #[test]
    fn bessel_reference_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        // I0(1) and I0(8) from tables
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i0(8.0) - 427.564_115_721_804_7).abs() < 1e-9);
    }

    #[test]
    fn constant_is_preserved() {
        let y = resample_signal(&[3.0; 1000], 64, 125);
        assert_eq!(y.len(), 512);
        for v in y {
            assert!((v - 3.0).abs() < 1e-9, "{v}");
        }
    }
}
