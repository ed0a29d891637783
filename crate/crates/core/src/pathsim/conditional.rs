//! Exact sampling of `X | X(1) > u` for standardized Gaussian kernels.
//!
//! Composes an inverse-CDF draw of `V = X(1)` from the normal law truncated
//! above `u` with the exact Gaussian conditional law of the remaining grid
//! coordinates given `X(1) = V`. No rejection is involved, so the cost is
//! flat in `u`.

use super::{GridSpec, PathEnsemble, SeedProvenance};
use crate::error::{CoreError, Result};
use crate::kernels::CovarianceKernel;
use crate::special;
use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

/// Cached pieces of the conditional sampler on a fixed grid.
pub struct ConditionalTailPlan {
    grid: GridSpec,
    /// Index of t = 1 in the grid.
    anchor: usize,
    /// Regression coefficients c_i = R(t_i, 1) of the others on X(1).
    coeff: Vec<f64>,
    /// Packed lower factor of the conditional covariance of the others.
    packed: Vec<f64>,
    tail_u: f64,
    u: f64,
}

/// Builds the conditional sampler. Requires a standardized Gaussian kernel,
/// `u >= -8`, and `t = 1` on the grid.
pub fn plan_conditional_tail(
    kernel: &CovarianceKernel,
    grid: &GridSpec,
    u: f64,
) -> Result<ConditionalTailPlan> {
    if u < -8.0 {
        return Err(CoreError::Unsupported(format!(
            "conditioning level u = {u} below -8 is indistinguishable from no conditioning"
        )));
    }
    if !kernel.is_standardized() {
        return Err(CoreError::Unsupported(
            "conditional sampling requires a standardized kernel (R(1,1) = 1)".into(),
        ));
    }
    let times = grid.times();
    let anchor = times
        .iter()
        .position(|&t| (t - 1.0).abs() < 1e-12)
        .ok_or_else(|| CoreError::invalid("grid", "t = 1 must be a grid point"))?;
    let others: Vec<usize> = (0..times.len()).filter(|&i| i != anchor).collect();
    let k = others.len();
    let coeff: Vec<f64> = others.iter().map(|&i| kernel.evaluate(times[i], 1.0)).collect();
    // Conditional covariance: Sigma_oo - c c^T (sigma_11 = 1).
    let cond = DMatrix::from_fn(k, k, |a, b| {
        kernel.evaluate(times[others[a]], times[others[b]]) - coeff[a] * coeff[b]
    });
    let max_diag = (0..k).map(|i| cond[(i, i)]).fold(1e-300f64, f64::max);
    let chol = [0.0, 1e-12, 1e-10]
        .iter()
        .find_map(|&jit| Cholesky::new(&cond + DMatrix::identity(k, k) * (jit * max_diag)))
        .ok_or_else(|| {
            CoreError::NumericalDegeneracy("conditional covariance not PSD within jitter".into())
        })?;
    let l = chol.unpack();
    let mut packed = Vec::with_capacity(k * (k + 1) / 2);
    for i in 0..k {
        for j in 0..=i {
            packed.push(l[(i, j)]);
        }
    }
    Ok(ConditionalTailPlan {
        grid: grid.clone(),
        anchor,
        coeff,
        packed,
        tail_u: special::norm_tail(u),
        u,
    })
}

impl ConditionalTailPlan {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn level(&self) -> f64 {
        self.u
    }

    /// Writes one conditional path into `out` (grid order).
    pub fn sample_into<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.grid.len();
        debug_assert_eq!(out.len(), n);
        // V = Phibar^{-1}(Phibar(u) * U) > u exactly.
        let unif: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let v = special::norm_tail_quantile(self.tail_u * unif);
        // Others: mean c V, noise L z.
        let k = n - 1;
        let mut at = 0;
        let mut oi = 0;
        let mut noise = vec![0.0; k];
        let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        for (i, nv) in noise.iter_mut().enumerate() {
            let row = &self.packed[at..at + i + 1];
            let mut acc = 0.0;
            for (l, zj) in row.iter().zip(&z) {
                acc += l * zj;
            }
            *nv = acc;
            at += i + 1;
        }
        for (j, o) in out.iter_mut().enumerate() {
            if j == self.anchor {
                *o = v;
            } else {
                *o = self.coeff[oi] * v + noise[oi];
                oi += 1;
            }
        }
    }
}

/// Samples `count` paths distributed as `X | X(1) > u`.
pub fn conditional_tail_ensemble<R: Rng>(
    kernel: &CovarianceKernel,
    grid: &GridSpec,
    u: f64,
    count: usize,
    rng: &mut R,
) -> Result<PathEnsemble> {
    let plan = plan_conditional_tail(kernel, grid, u)?;
    let n = grid.len();
    let mut values = vec![0.0; count * n];
    for i in 0..count {
        plan.sample_into(rng, &mut values[i * n..(i + 1) * n]);
    }
    PathEnsemble::new(grid.clone(), values, count, SeedProvenance::unspecified())
}
