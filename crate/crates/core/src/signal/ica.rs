//! Deflationary FastICA (tanh contrast) on centred, whitened channels.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Recording, SignalError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcaConfig {
    /// Upper bound on the number of components; capped at the data rank.
    pub n_components: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    /// Eigenvalues below `rank_tol · λ_max` are treated as zero.
    pub rank_tol: f64,
}

impl Default for IcaConfig {
    fn default() -> Self {
        IcaConfig {
            n_components: 32,
            seed: 0,
            tol: 1e-6,
            max_iter: 500,
            rank_tol: 1e-10,
        }
    }
}

/// Result of [`fastica`]. `r` is the effective rank, `c` the channel count.
#[derive(Clone, Debug)]
pub struct IcaDecomposition {
    /// Channel means removed before whitening, length `c`.
    pub mean: Vec<f64>,
    /// Whitening transform, `r × c`.
    pub whitening: DMatrix<f64>,
    /// Dewhitening (pseudo-inverse of `whitening`), `c × r`.
    pub dewhitening: DMatrix<f64>,
    /// Orthogonal unmixing in whitened space, `r × r`.
    pub unmixing: DMatrix<f64>,
    /// Inverse of `unmixing`, `r × r`.
    pub mixing: DMatrix<f64>,
    /// Estimated sources, `r × T`.
    pub sources: DMatrix<f64>,
    /// Whitened data, `r × T`.
    pub whitened: DMatrix<f64>,
    /// Rank of the channel covariance that was kept.
    pub rank: usize,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
}

impl IcaDecomposition {
    pub fn n_components(&self) -> usize {
        self.unmixing.nrows()
    }

    /// Channel-space mixing matrix `c × r`.
    pub fn channel_mixing(&self) -> DMatrix<f64> {
        &self.dewhitening * &self.mixing
    }

    /// Excess kurtosis of every source.
    pub fn kurtosis(&self) -> Vec<f64> {
        self.sources
            .row_iter()
            .map(|row| {
                let n = row.len() as f64;
                let m = row.sum() / n;
                let v = row.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
                let k = row.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
                if v > 0.0 {
                    k / (v * v) - 3.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Components with excess kurtosis above `threshold`. Advisory only.
    pub fn suggest_rejections(&self, threshold: f64) -> Vec<usize> {
        self.kurtosis()
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > threshold)
            .map(|(i, _)| i)
            .collect()
    }
}

fn to_matrix(rec: &Recording) -> DMatrix<f64> {
    let (c, t) = (rec.n_channels(), rec.n_samples());
    DMatrix::from_fn(c, t, |i, j| rec.samples[i][j])
}

/// Fit FastICA to a recording.
pub fn fastica(rec: &Recording, cfg: &IcaConfig) -> Result<IcaDecomposition, SignalError> {
    let c = rec.n_channels();
    let t = rec.n_samples();
    if c == 0 {
        return Err(SignalError::Ica("recording has no channels".into()));
    }
    if t < 10 * c {
        return Err(SignalError::TooShort {
            needed: 10 * c,
            actual: t,
        });
    }
    let mut x = to_matrix(rec);
    let mean: Vec<f64> = x.row_iter().map(|r| r.sum() / t as f64).collect();
    for (i, m) in mean.iter().enumerate() {
        x.row_mut(i).add_scalar_mut(-m);
    }

    let cov = (&x * x.transpose()) / t as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let lmax = eig.eigenvalues[order[0]];
    if lmax <= 0.0 {
        return Err(SignalError::Ica("all channels are constant".into()));
    }
    let rank = order.iter().filter(|&&i| eig.eigenvalues[i] > cfg.rank_tol * lmax).count();
    let r = rank.min(cfg.n_components.max(1));
    if rank < c {
        log::info!("ica: covariance rank {rank} of {c} channels; fitting {r} components");
    }

    let mut whitening = DMatrix::zeros(r, c);
    let mut dewhitening = DMatrix::zeros(c, r);
    for (k, &i) in order.iter().take(r).enumerate() {
        let l = eig.eigenvalues[i];
        let v = eig.eigenvectors.column(i);
        // deterministic sign: largest-magnitude entry positive
        let piv = (0..c).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a))).unwrap();
        let s = if v[piv] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..c {
            whitening[(k, j)] = s * v[j] / l.sqrt();
            dewhitening[(j, k)] = s * v[j] * l.sqrt();
        }
    }
    let z = &whitening * &x;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w_all = DMatrix::<f64>::zeros(r, r);
    let mut iterations = Vec::with_capacity(r);
    let mut converged = Vec::with_capacity(r);
    let inv_t = 1.0 / t as f64;
    for p in 0..r {
        let mut w = DVector::from_fn(r, |_, _| StandardNormal.sample(&mut rng));
        decorrelate(&mut w, &w_all, p);
        w.normalize_mut();
        let mut done = false;
        let mut it = 0;
        while it < cfg.max_iter {
            it += 1;
            let u = z.tr_mul(&w);
            let g = u.map(f64::tanh);
            let gp_mean = g.iter().map(|v| 1.0 - v * v).sum::<f64>() * inv_t;
            let mut w_new = (&z * &g) * inv_t - &w * gp_mean;
            decorrelate(&mut w_new, &w_all, p);
            let norm = w_new.norm();
            if norm == 0.0 {
                return Err(SignalError::Ica(format!("component {p} collapsed")));
            }
            w_new /= norm;
            let change = (1.0 - w_new.dot(&w).abs()).abs();
            w = w_new;
            if change < cfg.tol {
                done = true;
                break;
            }
        }
        if !done {
            log::warn!("ica: component {p} did not converge in {} iterations", cfg.max_iter);
        }
        w_all.set_row(p, &w.transpose());
        iterations.push(it);
        converged.push(done);
    }

    let sources = &w_all * &z;
    let mixing = w_all.transpose();
    Ok(IcaDecomposition {
        mean,
        whitening,
        dewhitening,
        unmixing: w_all,
        mixing,
        sources,
        whitened: z,
        rank,
        iterations,
        converged,
    })
}

fn decorrelate(w: &mut DVector<f64>, basis: &DMatrix<f64>, upto: usize) {
    for q in 0..upto {
        let b = basis.row(q).transpose();
        let d = w.dot(&b);
        w.axpy(-d, &b, 1.0);
    }
}

/// Subtract the channel-space contribution of the rejected components.
///
/// With `reject` empty this returns the input unchanged; with every
/// component rejected only the channel means (and any part of the signal
/// outside the fitted subspace) remain.
pub fn remove_components(
    rec: &Recording,
    decomp: &IcaDecomposition,
    reject: &[usize],
) -> Result<Recording, SignalError> {
    let r = decomp.n_components();
    if let Some(&bad) = reject.iter().find(|&&i| i >= r) {
        return Err(SignalError::ComponentOutOfRange { index: bad, count: r });
    }
    if rec.n_channels() != decomp.mean.len() || rec.n_samples() != decomp.sources.ncols() {
        return Err(SignalError::Ica("recording does not match the decomposition".into()));
    }
    if reject.is_empty() {
        return Ok(rec.clone());
    }
    let mut reject = reject.to_vec();
    reject.sort_unstable();
    reject.dedup();
    let a = decomp.channel_mixing();
    let t = rec.n_samples();
    let mut rows = rec.samples.clone();
    for &k in &reject {
        let col = a.column(k);
        let src = decomp.sources.row(k);
        for (ch, row) in rows.iter_mut().enumerate() {
            let coef = col[ch];
            // zero-filled channels stay exactly zero
            if coef == 0.0 || row.iter().all(|&v| v == 0.0) {
                continue;
            }
            for j in 0..t {
                row[j] -= coef * src[j];
            }
        }
    }
    Ok(rec.with_samples(rec.fs_hz, rows))
}
