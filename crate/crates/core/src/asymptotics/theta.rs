//! Monte-Carlo estimation of the occupation-time tail of the limit cluster
//! process, and its derivative at zero (the constant in the supremum
//! prediction).
//!
//! The cluster process for `r` overlapping copies is
//! `ξ_{r:r}(t) = min_i (√2 Z_i(D^{1/α} t) − D t^α + E_i − β₄ κ t)` with `Z_i`
//! standard fBm of Hurst `α/2` and `E_i` unit exponentials. For local
//! exponents `α > 1` the limit degenerates to the pure drift form
//! `ξ_i(t) = E_i − κ t`, whose occupation tail is `e^{−κ r x}` in closed
//! form.

use crate::error::{CoreError, Result};
use crate::pathsim::CirculantEmbedding;
use crate::quad;
use crate::rng::{stream, Phase};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Closed-form occupation tail of the pure-drift cluster: `e^{−κ r x}`.
pub fn theta_drift_closed_form(x: f64, kappa: f64, r: u32) -> f64 {
    (-kappa * f64::from(r) * x.max(0.0)).exp()
}

/// Derivative magnitude `−Θ'(0) = κ r` of the pure-drift closed form.
pub fn theta_drift_derivative(kappa: f64, r: u32) -> f64 {
    kappa * f64::from(r)
}

/// Monte-Carlo budget and discretization controls for [`estimate_theta`].
#[derive(Debug, Clone)]
pub struct ThetaConfig {
    /// Total simulated cluster paths.
    pub draws: u64,
    /// Paths per counter-based batch.
    pub batch_size: u64,
    /// Override of the default time step.
    pub step: Option<f64>,
    /// Starting horizon before adaptive doubling.
    pub initial_horizon: Option<f64>,
    pub master_seed: u64,
}

impl Default for ThetaConfig {
    fn default() -> Self {
        ThetaConfig {
            draws: 200_000,
            batch_size: 16_384,
            step: None,
            initial_horizon: None,
            master_seed: 0,
        }
    }
}

/// Estimated occupation-time tail on a level grid.
#[derive(Debug, Clone)]
pub struct ThetaEstimate {
    pub x_grid: Vec<f64>,
    /// Tail frequencies `P(occupation > x)`; the x = 0 entry is 1 exactly.
    pub theta: Vec<f64>,
    /// Binomial standard errors.
    pub stderr: Vec<f64>,
    /// Mean occupation time of the cluster.
    pub mean_occupation: f64,
    /// Horizon actually used after adaptive doubling.
    pub horizon: f64,
    /// Time step actually used.
    pub step: f64,
    pub draws: u64,
}

/// Estimates the occupation-time tail `Θ_r(x) = P(∫ 1{ξ_{r:r} > 0} dt > x)`
/// over `x_grid` by simulating the cluster on `[0, T]` with the cell rule.
///
/// `alpha ∈ (0, 1]` runs the full fractional cluster; `alpha ∈ (1, 2]` runs
/// the pure-drift degenerate form (where the closed form `e^{−κ r x}` is the
/// oracle). The horizon `T` doubles until the estimated probability of any
/// exceedance beyond `T/2` falls under 1e-3.
pub fn estimate_theta(
    r: u32,
    alpha: f64,
    d: f64,
    kappa: f64,
    beta4: f64,
    x_grid: &[f64],
    cfg: &ThetaConfig,
) -> Result<ThetaEstimate> {
    if r < 1 {
        return Err(CoreError::invalid("r", "need r >= 1 cluster copies"));
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(CoreError::invalid("alpha", format!("{alpha} not in (0,2]")));
    }
    if !(d > 0.0 && kappa > 0.0 && beta4 >= 0.0) {
        return Err(CoreError::invalid("d", "need D > 0, kappa > 0, beta4 >= 0"));
    }
    if x_grid.is_empty() || x_grid.windows(2).any(|w| w[1] <= w[0]) || x_grid[0] < 0.0 {
        return Err(CoreError::invalid("x_grid", "need a strictly increasing grid with x >= 0"));
    }
    if cfg.draws == 0 || cfg.batch_size == 0 {
        return Err(CoreError::invalid("draws", "Monte-Carlo budget must be positive"));
    }

    let drift_only = alpha > 1.0;
    let step = cfg.step.unwrap_or_else(|| {
        if drift_only {
            // The drift path is monotone, so the cell count has a closed
            // form and the step can be far below the lattice-bias scale.
            1e-6 / (kappa * f64::from(r))
        } else {
            0.05f64.min(0.2 * d.powf(-1.0 / alpha))
        }
    });

    // Horizon: start from the drift-balance scale and double until the
    // beyond-T/2 activity in a pilot batch is rare.
    let scale = if drift_only { 1.0 / (kappa * f64::from(r)) } else { (1.0 / d).powf(1.0 / alpha) };
    let t0 = cfg.initial_horizon.unwrap_or(8.0 * scale.max(1.0));
    let mut horizon = t0;
    let pilot = 4096u64.min(cfg.draws.max(1024));
    loop {
        let beyond = simulate_batches(
            r, alpha, d, kappa, beta4, step, horizon, x_grid, pilot, cfg.batch_size,
            cfg.master_seed, 1, // pilot streams disjoint from the main run
        )?
        .beyond_half;
        if (beyond as f64 / pilot as f64) < 1e-3 {
            break;
        }
        horizon *= 2.0;
        if horizon > t0 * 65_536.0 {
            return Err(CoreError::Horizon(format!(
                "cluster occupation still active beyond T/2 at T = {horizon:.1}"
            )));
        }
    }

    let acc = simulate_batches(
        r, alpha, d, kappa, beta4, step, horizon, x_grid, cfg.draws, cfg.batch_size,
        cfg.master_seed, 0,
    )?;
    let n = cfg.draws as f64;
    let mut theta = Vec::with_capacity(x_grid.len());
    let mut stderr = Vec::with_capacity(x_grid.len());
    for (i, &x) in x_grid.iter().enumerate() {
        if x == 0.0 {
            // The cluster starts strictly positive (E_i > 0), so the
            // occupation is positive almost surely.
            theta.push(1.0);
            stderr.push(0.0);
        } else {
            let p = acc.exceed_counts[i] as f64 / n;
            theta.push(p);
            stderr.push((p * (1.0 - p) / n).sqrt());
        }
    }
    Ok(ThetaEstimate {
        x_grid: x_grid.to_vec(),
        theta,
        stderr,
        mean_occupation: acc.occupation_sum / n,
        horizon,
        step,
        draws: cfg.draws,
    })
}

struct BatchAccumulator {
    exceed_counts: Vec<u64>,
    occupation_sum: f64,
    beyond_half: u64,
}

#[allow(clippy::too_many_arguments)]
fn simulate_batches(
    r: u32,
    alpha: f64,
    d: f64,
    kappa: f64,
    beta4: f64,
    step: f64,
    horizon: f64,
    x_grid: &[f64],
    draws: u64,
    batch_size: u64,
    master_seed: u64,
    stream_offset: u32,
) -> Result<BatchAccumulator> {
    let drift_only = alpha > 1.0;
    let cells = (horizon / step).ceil() as u64;
    if !drift_only && cells > 1 << 22 {
        return Err(CoreError::Resource(format!(
            "cluster grid of {cells} cells at step {step} is beyond the per-path budget"
        )));
    }
    // fGn machinery only for the fractional pathway.
    let embedding = if drift_only {
        None
    } else {
        let h2 = alpha; // 2H
        let inc_var = d * step.powf(alpha); // (D^{1/alpha} * step)^alpha
        let gamma = move |k: usize| {
            let k = k as f64;
            0.5 * inc_var * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
        };
        Some(CirculantEmbedding::from_autocov_fn(gamma, cells as usize)?)
    };

    let n_batches = draws.div_ceil(batch_size);
    let partials: Vec<BatchAccumulator> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(
                master_seed,
                Phase::Theta,
                ((stream_offset as u64) << 24) | b,
            );
            let todo = batch_size.min(draws - b * batch_size);
            let mut acc = BatchAccumulator {
                exceed_counts: vec![0; x_grid.len()],
                occupation_sum: 0.0,
                beyond_half: 0,
            };
            if drift_only {
                for _ in 0..todo {
                    let mut min_e = f64::INFINITY;
                    for _ in 0..r {
                        let e: f64 = -rng.gen_range(f64::MIN_POSITIVE..1.0f64).ln();
                        min_e = min_e.min(e);
                    }
                    // Monotone path: the cell rule count is closed-form.
                    let crossing = min_e / kappa;
                    let occupied = ((crossing / step).ceil() as u64).saturating_sub(1).min(cells);
                    let occ = occupied as f64 * step;
                    record(&mut acc, occ, x_grid);
                    if crossing > horizon / 2.0 {
                        acc.beyond_half += 1;
                    }
                }
            } else {
                let embedding = embedding.as_ref().unwrap();
                let k = cells as usize;
                let mut cluster_min = vec![f64::INFINITY; k];
                let mut z1 = vec![0.0; k];
                let mut z2 = vec![0.0; k];
                let mut buf = Vec::new();
                let brownian = (alpha - 1.0).abs() < 1e-12;
                let inc_sd = (d * step.powf(alpha)).sqrt();
                let mut stash = false;
                for _ in 0..todo {
                    cluster_min.iter_mut().for_each(|v| *v = f64::INFINITY);
                    for _ in 0..r {
                        let e: f64 = -rng.gen_range(f64::MIN_POSITIVE..1.0f64).ln();
                        let incs: &[f64] = if brownian {
                            for z in z1.iter_mut() {
                                let g: f64 = rng.sample(StandardNormal);
                                *z = inc_sd * g;
                            }
                            &z1
                        } else if stash {
                            stash = false;
                            &z2
                        } else {
                            embedding.sample_pair_into(&mut rng, &mut z1, &mut z2, &mut buf);
                            stash = true;
                            &z1
                        };
                        let mut zsum = 0.0;
                        for (j, inc) in incs.iter().enumerate() {
                            zsum += inc;
                            let v = std::f64::consts::SQRT_2 * zsum + e;
                            if v < cluster_min[j] {
                                cluster_min[j] = v;
                            }
                        }
                    }
                    // Cell rule over right endpoints t_j = (j+1) step.
                    let mut occupied = 0u64;
                    let mut beyond = false;
                    for (j, &m) in cluster_min.iter().enumerate() {
                        let t = (j + 1) as f64 * step;
                        if m - d * t.powf(alpha) - beta4 * kappa * t > 0.0 {
                            occupied += 1;
                            if t > horizon / 2.0 {
                                beyond = true;
                            }
                        }
                    }
                    record(&mut acc, occupied as f64 * step, x_grid);
                    if beyond {
                        acc.beyond_half += 1;
                    }
                }
            }
            acc
        })
        .collect();

    // Fixed-order fold keeps the floating sums reproducible.
    let mut total = BatchAccumulator {
        exceed_counts: vec![0; x_grid.len()],
        occupation_sum: 0.0,
        beyond_half: 0,
    };
    for p in partials {
        for (t, v) in total.exceed_counts.iter_mut().zip(&p.exceed_counts) {
            *t += v;
        }
        total.occupation_sum += p.occupation_sum;
        total.beyond_half += p.beyond_half;
    }
    Ok(total)
}

fn record(acc: &mut BatchAccumulator, occ: f64, x_grid: &[f64]) {
    acc.occupation_sum += occ;
    for (i, &x) in x_grid.iter().enumerate() {
        if occ > x {
            acc.exceed_counts[i] += 1;
        }
    }
}

/// Weighted least-squares slope of `(1 − Θ(x))` against `x` through the
/// origin, over the 3 to 5 smallest grid points in `(0, x_max]` with
/// `x_max = 0.5 · mean occupation`.
///
/// Returns the derivative estimate and its standard error; a non-positive
/// slope flags an inadequate grid.
pub fn theta_prime_at_zero(estimate: &ThetaEstimate) -> Result<(f64, f64)> {
    let x_max = 0.5 * estimate.mean_occupation;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (i, &x) in estimate.x_grid.iter().enumerate() {
        if x > 0.0 && x <= x_max && xs.len() < 5 {
            xs.push(x);
            ys.push(1.0 - estimate.theta[i]);
            let se = estimate.stderr[i].max(1e-12);
            ws.push(1.0 / (se * se));
        }
    }
    if xs.len() < 3 {
        return Err(CoreError::EstimationFailure(format!(
            "need at least 3 grid points in (0, {x_max:.3}] for the origin fit, found {}",
            xs.len()
        )));
    }
    let (slope, se) = quad::weighted_origin_slope(&xs, &ys, &ws);
    if !(slope > 0.0) {
        return Err(CoreError::EstimationFailure(format!(
            "non-positive derivative estimate {slope}; refine the x grid"
        )));
    }
    Ok((slope, se))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        vec![0.0, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0]
    }

    #[test]
    fn drift_pathway_matches_closed_form() {
        let (kappa, r) = (0.5, 2u32);
        let cfg = ThetaConfig { draws: 200_000, master_seed: 42, ..Default::default() };
        let est = estimate_theta(r, 2.0, 1.0, kappa, 1.0, &grid(), &cfg).unwrap();
        assert_eq!(est.theta[0], 1.0);
        for (i, &x) in est.x_grid.iter().enumerate().skip(1) {
            let expect = theta_drift_closed_form(x, kappa, r);
            assert!(
                (est.theta[i] - expect).abs() <= 3.0 * est.stderr[i].max(1e-4),
                "x={x}: {} vs {expect} (se {})",
                est.theta[i],
                est.stderr[i]
            );
        }
        // Mean occupation of Exp(r)/kappa is 1/(kappa r) = 1.
        assert!((est.mean_occupation - 1.0).abs() < 0.02);
    }

    #[test]
    fn theta_monotone_in_x_and_r() {
        let cfg = ThetaConfig { draws: 30_000, master_seed: 7, ..Default::default() };
        let e1 = estimate_theta(1, 1.0, 0.5, 0.5, 1.0, &grid(), &cfg).unwrap();
        let e2 = estimate_theta(2, 1.0, 0.5, 0.5, 1.0, &grid(), &cfg).unwrap();
        for w in e1.theta.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        // More overlapping copies shrink the occupation stochastically.
        for (a, b) in e2.theta.iter().zip(&e1.theta) {
            assert!(a <= &(b + 0.02));
        }
    }

    #[test]
    fn derivative_fit_recovers_drift_rate() {
        // Fit window c = kappa r x in [0.01, 0.05]: the curvature bias of the
        // origin-constrained fit stays under ~1.5% there.
        for (kappa, r) in [(0.25, 1u32), (0.5, 2), (1.0, 3)] {
            let cfg = ThetaConfig { draws: 400_000, master_seed: 11, ..Default::default() };
            let xs: Vec<f64> = vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.4, 0.8];
            let xs: Vec<f64> = xs.iter().map(|x| x / (kappa * f64::from(r))).collect();
            let est = estimate_theta(r, 2.0, 1.0, kappa, 1.0, &xs, &cfg).unwrap();
            let (slope, se) = theta_prime_at_zero(&est).unwrap();
            let expect = theta_drift_derivative(kappa, r);
            assert!(
                (slope - expect).abs() < 0.02 * expect,
                "kappa={kappa} r={r}: slope {slope} vs {expect} (se {se})"
            );
        }
    }

    #[test]
    fn derivative_fit_on_exact_exponential_samples() {
        // Feed the fit synthetic exact tail values of Exp(rate).
        let rate = 1.3;
        let xs = vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.5];
        let theta: Vec<f64> = xs.iter().map(|&x| (-rate * x as f64).exp()).collect();
        let est = ThetaEstimate {
            x_grid: xs.clone(),
            stderr: vec![1e-4; xs.len()],
            theta,
            mean_occupation: 1.0 / rate,
            horizon: 8.0,
            step: 1e-3,
            draws: 1,
        };
        let (slope, _) = theta_prime_at_zero(&est).unwrap();
        // Exact tails curve away from the secant: recovery within 10%.
        assert!((slope - rate).abs() < 0.1 * rate, "slope {slope}");
    }

    #[test]
    fn derivative_fit_needs_small_x_points() {
        let est = ThetaEstimate {
            x_grid: vec![0.0, 5.0, 6.0, 7.0],
            theta: vec![1.0, 0.1, 0.05, 0.02],
            stderr: vec![0.0, 1e-3, 1e-3, 1e-3],
            mean_occupation: 1.0,
            horizon: 8.0,
            step: 1e-3,
            draws: 1,
        };
        assert!(theta_prime_at_zero(&est).is_err());
    }

    #[test]
    fn brownian_cluster_derivative_near_one() {
        // alpha = 1, D = 1/2, kappa = 1/2, beta4 = 1: the cluster is
        // W(t) - t + E, whose occupation tail has derivative 1 at zero
        // (consistency of the supremum prediction with the exact Brownian
        // tail). Moderate budget: just a sanity window.
        let cfg = ThetaConfig { draws: 60_000, master_seed: 3, ..Default::default() };
        let est = estimate_theta(1, 1.0, 0.5, 0.5, 1.0, &grid(), &cfg).unwrap();
        let (slope, se) = theta_prime_at_zero(&est).unwrap();
        assert!(
            (slope - 1.0).abs() < 0.25 + 3.0 * se,
            "slope {slope} (se {se}) far from 1"
        );
        assert!(est.horizon >= 16.0);
    }

    #[test]
    fn parameter_validation() {
        let cfg = ThetaConfig::default();
        assert!(estimate_theta(0, 1.0, 0.5, 0.5, 1.0, &grid(), &cfg).is_err());
        assert!(estimate_theta(1, 0.0, 0.5, 0.5, 1.0, &grid(), &cfg).is_err());
        assert!(estimate_theta(1, 2.5, 0.5, 0.5, 1.0, &grid(), &cfg).is_err());
        assert!(estimate_theta(1, 1.0, -0.5, 0.5, 1.0, &grid(), &cfg).is_err());
        assert!(estimate_theta(1, 1.0, 0.5, 0.5, 1.0, &[0.3, 0.2], &cfg).is_err());
    }
}
