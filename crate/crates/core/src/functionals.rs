//! Path functionals: supremum, sojourn time above a level, horizon
//! rescaling and the excess-integral transform of normalized sojourns.

use crate::error::{CoreError, Result};

/// One sojourn observation `L = ∫_0^s 1{path > u} dt` together with its
/// normalization `L/q`.
#[derive(Debug, Clone, Copy)]
pub struct SojournSample {
    /// Occupied time in `[0, s]`.
    pub l: f64,
    /// Level.
    pub u: f64,
    /// Normalized value `L/q(u)`.
    pub normalized: f64,
}

/// Maximum of the grid values: the grid approximation of the continuous
/// supremum (its bias is negative and shrinks under refinement).
pub fn path_sup(path: &[f64]) -> Result<f64> {
    if path.is_empty() {
        return Err(CoreError::ShapeMismatch("empty path has no supremum".into()));
    }
    Ok(path.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Sojourn time of `path` above `u` over `(0, s]` by the cell rule: each
/// grid cell `(t_{j-1}, t_j]` contributes its length (clipped at `s`) times
/// the exceedance indicator at its right grid endpoint.
///
/// `times` and `path` share indexing; `q_u` is the time scale used for the
/// normalized value.
pub fn sojourn(times: &[f64], path: &[f64], u: f64, s: f64, q_u: f64) -> Result<SojournSample> {
    if times.len() != path.len() || path.is_empty() {
        return Err(CoreError::ShapeMismatch(format!(
            "path of {} values on {} times",
            path.len(),
            times.len()
        )));
    }
    if !(s > 0.0 && s <= 1.0) {
        return Err(CoreError::invalid("s", format!("{s} not in (0,1]")));
    }
    let mut l = 0.0;
    for j in 1..times.len() {
        if times[j - 1] >= s {
            break;
        }
        if path[j] > u {
            l += times[j].min(s) - times[j - 1];
        }
    }
    Ok(SojournSample { l, u, normalized: l / q_u })
}

/// True when the cell rule misses an exceedance that the grid sup sees:
/// `sup > u` but no right endpoint exceeds. A nonzero count over an ensemble
/// flags a too-coarse grid.
pub fn sup_sojourn_inconsistency(times: &[f64], path: &[f64], u: f64) -> Result<bool> {
    let sup = path_sup(path)?;
    let l = sojourn(times, path, u, 1.0, 1.0)?;
    Ok(sup > u && l.l == 0.0)
}

/// Level rescaling for horizons other than 1: the supremum over `[0, T]` at
/// level `u` has the law of the supremum over `[0,1]` at level `T^{−κ} u`.
pub fn horizon_rescale(u: f64, horizon: f64, kappa: f64) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(CoreError::invalid("horizon", format!("{horizon} must be positive")));
    }
    Ok(horizon.powf(-kappa) * u)
}

/// Excess-integral ratio of normalized sojourn samples at `x`:
/// `∫_x^∞ P(Y > y) dy / E[Y] = E[(Y−x)⁺] / E[Y]`, with a delta-method
/// standard error for the ratio of means.
#[derive(Debug, Clone, Copy)]
pub struct ExcessIntegral {
    pub x: f64,
    pub ratio: f64,
    pub stderr: f64,
}

pub fn excess_integral(samples: &[f64], x: f64) -> Result<ExcessIntegral> {
    if x < 0.0 {
        return Err(CoreError::invalid("x", format!("{x} must be >= 0")));
    }
    let n = samples.len();
    if n == 0 || !samples.iter().any(|&y| y > 0.0) {
        return Err(CoreError::UndefinedRatio(
            "excess integral needs at least one positive sojourn sample".into(),
        ));
    }
    let nf = n as f64;
    let mut sa = 0.0; // (y-x)+
    let mut sb = 0.0; // y
    let mut saa = 0.0;
    let mut sbb = 0.0;
    let mut sab = 0.0;
    for &y in samples {
        let a = (y - x).max(0.0);
        sa += a;
        sb += y;
        saa += a * a;
        sbb += y * y;
        sab += a * y;
    }
    let ma = sa / nf;
    let mb = sb / nf;
    let ratio = ma / mb;
    // First-order delta method for A/B with per-sample covariance.
    let va = saa / nf - ma * ma;
    let vb = sbb / nf - mb * mb;
    let cab = sab / nf - ma * mb;
    let stderr = if ma > 0.0 {
        let var = (va / (ma * ma) + vb / (mb * mb) - 2.0 * cab / (ma * mb)) * ratio * ratio / nf;
        var.max(0.0).sqrt()
    } else {
        0.0
    };
    Ok(ExcessIntegral { x, ratio, stderr })
}
