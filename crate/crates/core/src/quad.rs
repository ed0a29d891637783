//! Adaptive quadrature and small grid helpers.

use crate::error::{CoreError, Result};

/// Adaptive Simpson integration of `f` over `[a, b]`.
///
/// Subdivides until the Richardson error estimate of each panel is below its
/// share of `max(abs_tol, rel_tol * |I|)`, with `|I|` taken from a coarse
/// first pass. Intended for smooth integrands; errors out instead of spinning
/// when the evaluation budget is exhausted.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(CoreError::invalid("interval", format!("[{a}, {b}]")));
    }
    // Coarse scale estimate on 64 panels.
    let n0 = 64usize;
    let h0 = (b - a) / n0 as f64;
    let mut rough = 0.0;
    for i in 0..n0 {
        let x0 = a + i as f64 * h0;
        rough += simpson(&f, x0, x0 + h0);
    }
    let tol = abs_tol.max(rel_tol * rough.abs());

    const MAX_EVALS: usize = 4_000_000;
    let mut evals = 0usize;
    let mut total = 0.0;
    // Stack of (lo, hi, whole-panel Simpson value, panel tolerance, depth).
    let mut stack: Vec<(f64, f64, f64, f64, u32)> = Vec::new();
    for i in 0..n0 {
        let x0 = a + i as f64 * h0;
        let x1 = x0 + h0;
        stack.push((x0, x1, simpson(&f, x0, x1), tol / n0 as f64, 0));
    }
    while let Some((lo, hi, whole, ptol, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = simpson(&f, lo, mid);
        let right = simpson(&f, mid, hi);
        evals += 10;
        if evals > MAX_EVALS {
            return Err(CoreError::NumericalDegeneracy(format!(
                "quadrature did not converge on [{a}, {b}] (eval budget {MAX_EVALS} exhausted, \
                 current panel [{lo}, {hi}])"
            )));
        }
        let delta = left + right - whole;
        if depth >= 52 || delta.abs() <= 15.0 * ptol {
            total += left + right + delta / 15.0;
        } else {
            stack.push((lo, mid, left, ptol / 2.0, depth + 1));
            stack.push((mid, hi, right, ptol / 2.0, depth + 1));
        }
    }
    Ok(total)
}

fn simpson<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi))
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (ratio * i as f64).exp()).collect()
}

/// Weighted least-squares slope of `y` on `x` through the origin.
///
/// Returns `(slope, stderr)` with `stderr = sqrt(1 / Σ w x²)`, the exact
/// standard error when `w_i = 1/Var(y_i)`.
pub fn weighted_origin_slope(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    assert_eq!(x.len(), w.len());
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((x, y), w)| w * x * y).sum();
    let sxx: f64 = x.iter().zip(w).map(|(x, w)| w * x * x).sum();
    (sxy / sxx, (1.0 / sxx).sqrt())
}

/// Ordinary least-squares fit of `y = intercept + slope * x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}
