//! Circulant-embedding sampler for stationary Gaussian sequences.
//!
//! Embeds the Toeplitz covariance of the target sequence into a circulant
//! matrix of power-of-two order, diagonalizes it with one FFT, and then draws
//! two independent sample sequences per complex FFT (real and imaginary
//! parts are independent when the spectral coefficients carry full iid
//! complex Gaussians).

use super::{GridSpec, PathEnsemble, SeedProvenance};
use crate::error::{CoreError, Result};
use crate::kernels::StationaryKernel;
use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Relative floor for negative embedding eigenvalues: smaller (more negative)
/// values reject the embedding, larger ones are clipped to zero.
const NEG_EIG_TOL: f64 = 1e-9;

/// Spectral square root of a nonnegative circulant embedding.
pub struct CirculantEmbedding {
    n: usize,
    m: usize,
    sqrt_eig: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    /// Most negative raw eigenvalue (diagnostic; zero or tiny negative).
    pub min_eigenvalue: f64,
    /// Whether any eigenvalue was clipped to zero.
    pub clipped: bool,
}

impl CirculantEmbedding {
    /// Builds the embedding for a length-`n` sequence with autocovariance
    /// `autocov(k)` at integer lags (`k` up to the embedding half-order).
    pub fn from_autocov_fn(autocov: impl Fn(usize) -> f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(CoreError::invalid("n", "embedding needs a sequence of length >= 2"));
        }
        let m = (2 * (n - 1)).next_power_of_two();
        let mut row: Vec<Complex<f64>> = (0..m)
            .map(|j| Complex::new(autocov(j.min(m - j)), 0.0))
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut row);

        let mut min_eig = f64::INFINITY;
        let mut max_eig = f64::NEG_INFINITY;
        for v in &row {
            min_eig = min_eig.min(v.re);
            max_eig = max_eig.max(v.re);
        }
        if min_eig < -NEG_EIG_TOL * max_eig.max(1.0) {
            return Err(CoreError::NumericalDegeneracy(format!(
                "circulant embedding of order {m} has negative eigenvalue {min_eig:.3e} \
                 (max {max_eig:.3e})"
            )));
        }
        let clipped = min_eig < 0.0;
        let sqrt_eig = row.iter().map(|v| v.re.max(0.0).sqrt()).collect();
        Ok(CirculantEmbedding { n, m, sqrt_eig, fft, min_eigenvalue: min_eig, clipped })
    }

    /// Target sequence length.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Embedding order (power of two).
    pub fn order(&self) -> usize {
        self.m
    }

    /// Draws two independent stationary sequences into `out1` and `out2`
    /// (each of length `len()`), using `buf` as FFT scratch.
    pub fn sample_pair_into<R: Rng>(
        &self,
        rng: &mut R,
        out1: &mut [f64],
        out2: &mut [f64],
        buf: &mut Vec<Complex<f64>>,
    ) {
        debug_assert_eq!(out1.len(), self.n);
        debug_assert_eq!(out2.len(), self.n);
        buf.resize(self.m, Complex::new(0.0, 0.0));
        for (b, sq) in buf.iter_mut().zip(&self.sqrt_eig) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *b = Complex::new(sq * re, sq * im);
        }
        self.fft.process(buf);
        let scale = 1.0 / (self.m as f64).sqrt();
        for j in 0..self.n {
            out1[j] = buf[j].re * scale;
            out2[j] = buf[j].im * scale;
        }
    }
}

/// Samples `count` paths of the stationary sequence `X̃(s_j)` on the log
/// axis of `grid` (a log-uniform grid on `(0,1]`).
///
/// Falls back to dense Cholesky of the Toeplitz covariance when the
/// embedding has disqualifying negative eigenvalues; the boolean in the
/// return value records that event.
pub fn circulant_sample<R: Rng>(
    stationary: &StationaryKernel,
    grid: &GridSpec,
    count: usize,
    rng: &mut R,
) -> Result<(PathEnsemble, bool)> {
    let s_axis = grid.log_axis()?;
    let n = s_axis.len();
    let step = s_axis.uniform_step();
    match CirculantEmbedding::from_autocov_fn(|k| stationary.autocov(k as f64 * step), n) {
        Ok(embedding) => {
            let mut values = vec![0.0; count * n];
            let mut buf = Vec::new();
            let mut spare = vec![0.0; n];
            let mut i = 0;
            while i < count {
                if i + 1 < count {
                    let (a, b) = values[i * n..(i + 2) * n].split_at_mut(n);
                    embedding.sample_pair_into(rng, a, b, &mut buf);
                    i += 2;
                } else {
                    let out = &mut values[i * n..(i + 1) * n];
                    embedding.sample_pair_into(rng, out, &mut spare, &mut buf);
                    i += 1;
                }
            }
            let ens = PathEnsemble::new(s_axis, values, count, SeedProvenance::unspecified())?;
            Ok((ens, false))
        }
        Err(_) => {
            if n > 4096 {
                return Err(CoreError::NumericalDegeneracy(format!(
                    "circulant embedding rejected and grid of {n} points is too large for the \
                     Cholesky fallback"
                )));
            }
            let toeplitz = DMatrix::from_fn(n, n, |i, j| {
                stationary.autocov((i as f64 - j as f64).abs() * step)
            });
            let var0 = stationary.autocov(0.0);
            let chol = [0.0, 1e-12, 1e-10]
                .iter()
                .find_map(|&jit| Cholesky::new(&toeplitz + DMatrix::identity(n, n) * (jit * var0)))
                .ok_or_else(|| {
                    CoreError::NumericalDegeneracy("stationary covariance not PSD within jitter".into())
                })?;
            let l = chol.unpack();
            let mut values = vec![0.0; count * n];
            let mut z = vec![0.0; n];
            for i in 0..count {
                for zj in z.iter_mut() {
                    *zj = rng.sample(StandardNormal);
                }
                let out = &mut values[i * n..(i + 1) * n];
                for (r, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for c in 0..=r {
                        acc += l[(r, c)] * z[c];
                    }
                    *o = acc;
                }
            }
            let ens = PathEnsemble::new(s_axis, values, count, SeedProvenance::unspecified())?;
            Ok((ens, true))
        }
    }
}
