//! Butterworth band-pass design (bilinear transform) and zero-phase
//! forward-backward filtering with second-order sections.

use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

use super::{Recording, SignalError};

/// One biquad, `a0` normalised to 1: `[b0, b1, b2, a1, a2]`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Transposed direct-form II state reached after a long unit-step input.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let s2 = self.b[2] - self.a[1] * g;
        let s1 = self.b[1] - self.a[0] * g + s2;
        [s1, s2]
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + z_inv * self.b[1] + z2 * self.b[2]) / (1.0 + z_inv * self.a[0] + z2 * self.a[1])
    }
}

/// Cascade of biquads.
#[derive(Clone, Debug, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, fs_hz: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / fs_hz);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    /// Causal filtering starting from `state` (one `[s1, s2]` per section).
    fn run(&self, x: &mut [f64], state: &mut [[f64; 2]]) {
        for (sec, st) in self.sections.iter().zip(state.iter_mut()) {
            let [b0, b1, b2] = sec.b;
            let [a1, a2] = sec.a;
            let [mut s1, mut s2] = *st;
            for v in x.iter_mut() {
                let xin = *v;
                let y = b0 * xin + s1;
                s1 = b1 * xin - a1 * y + s2;
                s2 = b2 * xin - a2 * y;
                *v = y;
            }
            *st = [s1, s2];
        }
    }

    /// Per-section initial state matching a constant input of amplitude one.
    fn steady_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let [s1, s2] = s.step_state();
                let out = [s1 * scale, s2 * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }

    /// Shortest signal [`Self::filtfilt`] accepts, minus one.
    pub fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Largest pole radius across sections.
    pub fn max_pole_radius(&self) -> f64 {
        self.sections
            .iter()
            .map(|s| {
                let disc = Complex64::new(s.a[0] * s.a[0] - 4.0 * s.a[1], 0.0).sqrt();
                ((-s.a[0] + disc) / 2.0).norm().max(((-s.a[0] - disc) / 2.0).norm())
            })
            .fold(0.0, f64::max)
    }

    /// Samples needed for the slowest mode to decay by `1e-14`.
    pub fn settle_len(&self) -> usize {
        let r = self.max_pole_radius();
        if r <= 0.0 {
            return 0;
        }
        ((1e-14f64).ln() / r.ln()).ceil() as usize
    }

    /// Zero-phase filtering: forward pass, then a pass over the reversed output.
    ///
    /// Both ends are extended by mirror reflection over [`Self::settle_len`]
    /// samples (reflecting repeatedly when the signal is shorter), and each
    /// pass starts from the steady state of its first sample. Start-up
    /// transients have decayed below rounding before reaching the data, so the
    /// result commutes with time reversal.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>, SignalError> {
        let n = x.len();
        let min_len = self.pad_len();
        if n <= min_len {
            return Err(SignalError::TooShort {
                needed: min_len + 1,
                actual: n,
            });
        }
        let pad = self.settle_len().max(min_len);
        let m = (n - 1) as isize;
        // mirror about the end samples, repeating as often as needed
        let period = 2 * m;
        let at = |k: isize| -> f64 {
            let j = k.rem_euclid(period);
            x[(if j > m { period - j } else { j }) as usize]
        };
        let p = pad as isize;
        let mut ext: Vec<f64> = (-p..m + 1 + p).map(at).collect();

        let zi = self.steady_state();
        let mut state: Vec<[f64; 2]> = zi.iter().map(|s| [s[0] * ext[0], s[1] * ext[0]]).collect();
        self.run(&mut ext, &mut state);
        ext.reverse();
        let mut state: Vec<[f64; 2]> = zi.iter().map(|s| [s[0] * ext[0], s[1] * ext[0]]).collect();
        self.run(&mut ext, &mut state);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }
}

/// Digital Butterworth band-pass of prototype order `order` (the cascade has
/// `order` biquads, i.e. `2·order` poles), normalised to unit gain at the
/// geometric centre of the pass band.
pub fn butterworth_bandpass(order: usize, low_hz: f64, high_hz: f64, fs_hz: f64) -> Result<SosFilter, SignalError> {
    let nyquist = fs_hz / 2.0;
    if order == 0 || !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist) {
        return Err(SignalError::InvalidBand {
            low_hz,
            high_hz,
            fs_hz,
        });
    }
    // pre-warped analog edges
    let fs2 = 2.0 * fs_hz;
    let w1 = fs2 * (PI * low_hz / fs_hz).tan();
    let w2 = fs2 * (PI * high_hz / fs_hz).tan();
    let bw = w2 - w1;
    let w0 = (w1 * w2).sqrt();

    let mut poles = Vec::with_capacity(2 * order);
    for k in 0..order {
        // left-half-plane prototype poles on the unit circle
        let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let p = Complex64::from_polar(1.0, theta);
        let half = p * (bw / 2.0);
        let disc = (half * half - w0 * w0).sqrt();
        for s in [half + disc, half - disc] {
            poles.push((fs2 + s) / (fs2 - s));
        }
    }

    // pair conjugates; real poles are paired with each other
    let tol = 1e-12;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > tol).collect();
    let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= tol).map(|p| p.re).collect();
    complex.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    real.sort_by(f64::total_cmp);
    debug_assert_eq!(2 * complex.len() + real.len(), 2 * order);

    let mut sections: Vec<Biquad> = complex
        .iter()
        .map(|p| Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-2.0 * p.re, p.norm_sqr()],
        })
        .collect();
    for pair in real.chunks(2) {
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-(pair[0] + pair[1]), pair[0] * pair[1]],
        });
    }

    let mut filter = SosFilter { sections };
    let centre = (w0 / fs2).atan() * fs_hz / PI;
    let gain = filter.response(centre, fs_hz).norm();
    let s0 = &mut filter.sections[0];
    s0.b.iter_mut().for_each(|b| *b /= gain);
    Ok(filter)
}

/// Zero-phase band-pass of every channel.
pub fn bandpass(rec: &Recording, low_hz: f64, high_hz: f64, order: usize) -> Result<Recording, SignalError> {
    let filter = butterworth_bandpass(order, low_hz, high_hz, rec.fs_hz)?;
    let rows = rec
        .samples
        .iter()
        .map(|row| filter.filtfilt(row))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(rec.with_samples(rec.fs_hz, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_edges_are_validated() {
        assert!(butterworth_bandpass(4, 0.0, 64.0, 256.0).is_err());
        assert!(butterworth_bandpass(4, 10.0, 5.0, 256.0).is_err());
        assert!(butterworth_bandpass(4, 0.5, 128.0, 256.0).is_err());
        assert!(butterworth_bandpass(0, 0.5, 64.0, 256.0).is_err());
    }

    #[test]
    fn response_is_butterworth_shaped() {
        for order in 1..=5 {
            let f = butterworth_bandpass(order, 0.5, 64.0, 256.0).unwrap();
            assert_eq!(f.sections.len(), order);
            // -3 dB at both edges, as for any Butterworth
            for edge in [0.5, 64.0] {
                let g = f.response(edge, 256.0).norm();
                assert!((g - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9, "order {order} edge {edge}: {g}");
            }
            assert!(f.response(0.0, 256.0).norm() < 1e-12);
            assert!(f.response(127.999, 256.0).norm() < 1e-3);
        }
    }

    #[test]
    fn stable_poles() {
        let f = butterworth_bandpass(4, 0.5, 64.0, 256.0).unwrap();
        for s in &f.sections {
            // roots of z^2 + a1 z + a2 inside the unit circle
            let disc = Complex64::new(s.a[0] * s.a[0] - 4.0 * s.a[1], 0.0).sqrt();
            for r in [(-s.a[0] + disc) / 2.0, (-s.a[0] - disc) / 2.0] {
                assert!(r.norm() < 1.0);
            }
        }
    }

    #[test]
    fn too_short_input_is_an_error() {
        let f = butterworth_bandpass(4, 0.5, 64.0, 256.0).unwrap();
        assert!(f.filtfilt(&[1.0; 10]).is_err());
    }
}
