//! Dense Cholesky sampling of Gaussian paths on arbitrary grids.

use super::{GridSpec, PathEnsemble, SeedProvenance};
use crate::error::{CoreError, Result};
use crate::kernels::CovarianceKernel;
use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

/// Diagonal jitter ladder (relative to the largest diagonal entry) tried
/// before declaring the Gram matrix degenerate.
const JITTERS: [f64; 3] = [0.0, 1e-12, 1e-10];

/// Cached lower-triangular factor of a kernel's Gram matrix on a grid.
///
/// The factor is stored as packed row-major triangle rows so that the
/// per-path matrix-vector product walks memory contiguously.
pub struct CholeskyPlan {
    grid: GridSpec,
    packed: Vec<f64>,
    jitter: f64,
}

impl CholeskyPlan {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Jitter (relative to the max diagonal entry) that was needed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Dense lower-triangular factor `L` with `L Lᵀ ≈ Gram`.
    pub fn factor_dense(&self) -> DMatrix<f64> {
        let n = self.grid.len();
        let mut m = DMatrix::zeros(n, n);
        let mut at = 0;
        for i in 0..n {
            for j in 0..=i {
                m[(i, j)] = self.packed[at];
                at += 1;
            }
        }
        m
    }

    /// `out = L z` without allocating.
    pub fn apply_factor(&self, z: &[f64], out: &mut [f64]) {
        let n = self.grid.len();
        debug_assert_eq!(z.len(), n);
        debug_assert_eq!(out.len(), n);
        let mut at = 0;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.packed[at..at + i + 1];
            let mut acc = 0.0;
            for (l, zj) in row.iter().zip(z) {
                acc += l * zj;
            }
            *o = acc;
            at += i + 1;
        }
    }
}

/// Factors the Gram matrix of `kernel` on `grid`, escalating diagonal jitter
/// from 0 through 1e-12 to 1e-10 before failing.
pub fn plan_cholesky(kernel: &CovarianceKernel, grid: &GridSpec) -> Result<CholeskyPlan> {
    let times = grid.times();
    if let Some(w) = times.windows(2).find(|w| w[1] - w[0] <= 0.0) {
        return Err(CoreError::NumericalDegeneracy(format!(
            "grid has duplicated or decreasing time points near t = {}",
            w[0]
        )));
    }
    let n = times.len();
    let gram = DMatrix::from_fn(n, n, |i, j| kernel.evaluate(times[i], times[j]));
    let max_diag = (0..n).map(|i| gram[(i, i)]).fold(f64::MIN, f64::max);
    for jitter in JITTERS {
        let jittered = if jitter == 0.0 {
            gram.clone()
        } else {
            &gram + DMatrix::identity(n, n) * (jitter * max_diag)
        };
        if let Some(chol) = Cholesky::new(jittered) {
            let l = chol.unpack();
            let mut packed = Vec::with_capacity(n * (n + 1) / 2);
            for i in 0..n {
                for j in 0..=i {
                    packed.push(l[(i, j)]);
                }
            }
            return Ok(CholeskyPlan { grid: grid.clone(), packed, jitter });
        }
    }
    Err(CoreError::NumericalDegeneracy(format!(
        "Gram matrix of `{}` on the {n}-point grid [{:.3e}, {:.3e}] is not PSD within jitter 1e-10",
        kernel.name(),
        times[0],
        times[n - 1]
    )))
}

/// Draws `n` independent paths `L z` with `z` standard normal.
pub fn sample_paths<R: Rng>(plan: &CholeskyPlan, n: usize, rng: &mut R) -> Result<PathEnsemble> {
    if n < 1 {
        return Err(CoreError::invalid("n", "need at least one path"));
    }
    let len = plan.grid.len();
    let mut values = vec![0.0; n * len];
    let mut z = vec![0.0; len];
    for i in 0..n {
        for zj in z.iter_mut() {
            *zj = rng.sample(StandardNormal);
        }
        plan.apply_factor(&z, &mut values[i * len..(i + 1) * len]);
    }
    PathEnsemble::new(plan.grid.clone(), values, n, SeedProvenance::unspecified())
}
