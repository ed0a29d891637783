//! Exact and first-order formulas for order-statistic marginal tails, mean
//! sojourn times, the limit-cluster occupation tail and the resulting
//! supremum-probability predictions.

mod theta;

pub use theta::{
    estimate_theta, theta_drift_closed_form, theta_drift_derivative, theta_prime_at_zero,
    ThetaConfig, ThetaEstimate,
};

use crate::error::{CoreError, Result};
use crate::kernels::{MarginalLaw, ScalingScheme};
use crate::quad;
use crate::special;

/// Exact tail of the `r`-th largest of `n` iid copies at level `u`:
/// `Ḡ_r(u) = P(Bin(n, Ḡ(u)) ≥ r)`, computed in the log domain so levels
/// with `Ḡ(u)` near the underflow range stay accurate.
pub fn order_tail_exact(u: f64, n: u32, r: u32, marginal: &MarginalLaw) -> Result<f64> {
    check_order(n, r)?;
    Ok(special::binomial_upper_tail(n, r, marginal.tail(u)))
}

/// First-order tail `C(n,r) Ḡ(u)^r` together with the order-statistic
/// auxiliary rate `w_r(u) = r w(u)`.
pub fn order_tail_asymptotic(u: f64, n: u32, r: u32, marginal: &MarginalLaw) -> Result<(f64, f64)> {
    check_order(n, r)?;
    let p = marginal.tail(u);
    let tail = special::binom(n, r) * p.powi(r as i32);
    Ok((tail, f64::from(r) * marginal.aux_rate(u)))
}

fn check_order(n: u32, r: u32) -> Result<()> {
    if n < 1 || r < 1 || r > n {
        return Err(CoreError::invalid("r", format!("order index {r} not in 1..={n}")));
    }
    Ok(())
}

/// Level beyond which every built-in marginal tail is far below the f64
/// underflow range; integrands are truncated there.
const LEVEL_CAP: f64 = 37.0;

/// Exact mean sojourn time `E L_r(u) = ∫_0^1 Ḡ_r(u t^{−κ}) dt` by adaptive
/// quadrature with relative error 1e-6.
pub fn mean_sojourn_exact(u: f64, n: u32, r: u32, marginal: &MarginalLaw, kappa: f64) -> Result<f64> {
    check_order(n, r)?;
    if !(u > 0.0) {
        return Err(CoreError::invalid("u", format!("level {u} must be positive")));
    }
    if !(kappa > 0.0) {
        return Err(CoreError::invalid("kappa", format!("{kappa} must be positive")));
    }
    // Below t_lo the integrand is < G_r(LEVEL_CAP) ~ 1e-300: negligible.
    let t_lo = if u >= LEVEL_CAP { 0.0 } else { (u / LEVEL_CAP).powf(1.0 / kappa) };
    let f = |t: f64| special::binomial_upper_tail(n, r, marginal.tail(u * t.powf(-kappa)));
    quad::integrate(f, t_lo.max(1e-280), 1.0, 1e-7, 0.0).map_err(|e| {
        CoreError::NumericalDegeneracy(format!(
            "mean sojourn quadrature failed at u={u}, n={n}, r={r}: {e}"
        ))
    })
}

/// First-order mean sojourn `Ḡ_r(u) / (κ u w_r(u))` with the exact binomial
/// tail in the numerator and `w_r = r w`.
pub fn mean_sojourn_asymptotic(
    u: f64,
    n: u32,
    r: u32,
    marginal: &MarginalLaw,
    kappa: f64,
) -> Result<f64> {
    check_order(n, r)?;
    if !(u > 0.0) {
        return Err(CoreError::invalid("u", format!("level {u} must be positive")));
    }
    let tail = special::binomial_upper_tail(n, r, marginal.tail(u));
    Ok(tail / (kappa * u * f64::from(r) * marginal.aux_rate(u)))
}

/// Variant of [`mean_sojourn_asymptotic`] with the leading-term tail
/// `C(n,r) Ḡ(u)^r` in place of the exact binomial tail.
pub fn mean_sojourn_asymptotic_leading(
    u: f64,
    n: u32,
    r: u32,
    marginal: &MarginalLaw,
    kappa: f64,
) -> Result<f64> {
    let (tail, w_r) = order_tail_asymptotic(u, n, r, marginal)?;
    if !(u > 0.0) {
        return Err(CoreError::invalid("u", format!("level {u} must be positive")));
    }
    Ok(tail / (kappa * u * w_r))
}

/// Which hypothesis route makes the mean-sojourn prediction applicable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionPathway {
    /// `0 < β₃ ≤ β₄ < ∞` with the tightness condition.
    BetaWindow,
    /// `β₃ = 0` route: requires the short-lasting-exceedance and two-point
    /// tightness conditions instead.
    BCStar,
}

/// Supremum-probability prediction `−Θ'_r(0) · E L_r(u) / q(u)`.
#[derive(Debug, Clone, Copy)]
pub struct SupPrediction {
    pub value: f64,
    pub pathway: PredictionPathway,
}

/// Prediction of `P(sup_{[0,1]} X_{r:n} > u)` from the mean sojourn time and
/// the occupation-tail derivative at zero.
pub fn p_prediction_mean_sojourn(
    u: f64,
    n: u32,
    r: u32,
    marginal: &MarginalLaw,
    kappa: f64,
    scheme: &ScalingScheme,
    theta_prime: f64,
) -> Result<SupPrediction> {
    if !(theta_prime > 0.0) {
        return Err(CoreError::invalid("theta_prime", "derivative must be positive"));
    }
    let mean = mean_sojourn_exact(u, n, r, marginal, kappa)?;
    let pathway = if scheme.beta3 > 0.0 && scheme.beta4.is_finite() {
        PredictionPathway::BetaWindow
    } else {
        PredictionPathway::BCStar
    };
    Ok(SupPrediction { value: theta_prime * mean / scheme.q(u), pathway })
}

/// Prediction of `P(sup_{[0,1]} X_{r:n} > u)` in the `β₃ = ∞` regime, where
/// the supremum tail is equivalent to the endpoint tail `Ḡ_r(u)`.
///
/// None of the built-in scaling schemes has `β₃ = ∞`; the boolean marks
/// applicability.
pub fn p_prediction_endpoint(
    u: f64,
    n: u32,
    r: u32,
    marginal: &MarginalLaw,
    scheme: &ScalingScheme,
) -> Result<(f64, bool)> {
    let tail = order_tail_exact(u, n, r, marginal)?;
    Ok((tail, scheme.beta3.is_infinite()))
}

/// Adapted time sequence `t(0) = 1`,
/// `t(k+1) = t(k) (1 − a q(t(k)^{−κ} u))`, stored down to `t_floor`.
#[derive(Debug, Clone)]
pub struct TSequence {
    pub a: f64,
    pub u: f64,
    pub points: Vec<f64>,
}

/// Iterates the adapted sequence. Requires `0 < a ≤ ã = 1/(2 sup q)`; since
/// `q > 0` the sequence is strictly decreasing, and iteration stops at the
/// first point at or below `t_floor`.
pub fn t_sequence(
    a: f64,
    u: f64,
    kappa: f64,
    scheme: &ScalingScheme,
    t_floor: f64,
) -> Result<TSequence> {
    let a_tilde = scheme.a_tilde();
    if !(a > 0.0 && a <= a_tilde) {
        return Err(CoreError::invalid("a", format!("{a} not in (0, {a_tilde}]")));
    }
    if !(u > 0.0) {
        return Err(CoreError::invalid("u", format!("level {u} must be positive")));
    }
    if !(t_floor > 0.0 && t_floor < 1.0) {
        return Err(CoreError::invalid("t_floor", format!("{t_floor} not in (0,1)")));
    }
    let mut points = vec![1.0f64];
    loop {
        let t = *points.last().unwrap();
        if t <= t_floor {
            break;
        }
        if points.len() > 10_000_000 {
            return Err(CoreError::NumericalDegeneracy(format!(
                "adapted sequence exceeded 1e7 points before reaching floor {t_floor}"
            )));
        }
        let next = t * (1.0 - a * scheme.q(t.powf(-kappa) * u));
        points.push(next);
    }
    Ok(TSequence { a, u, points })
}

impl TSequence {
    /// Largest recursion residual
    /// `|t(k+1) − t(k)(1 − a q(t(k)^{−κ} u))|` over the stored points
    /// (zero: the points are produced by that very recursion).
    pub fn recursion_residual(&self, kappa: f64, scheme: &ScalingScheme) -> f64 {
        let mut worst = 0.0f64;
        for w in self.points.windows(2) {
            let expect = w[0] * (1.0 - self.a * scheme.q(w[0].powf(-kappa) * self.u));
            worst = worst.max((w[1] - expect).abs());
        }
        worst
    }
}
