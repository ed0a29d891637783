//! Scalar special functions: standard normal law, chi law, stable binomial
//! tails and the bivariate normal upper-orthant probability.

use statrs::function::gamma;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;
const FRAC_1_2PI: f64 = 0.159_154_943_091_895_34;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal distribution function `Φ(x)`.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal upper tail `Φ̄(x) = 1 − Φ(x)`, accurate far into the tail.
pub fn norm_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Upper-tail quantile: the `x` with `norm_tail(x) = p`, for `p ∈ (0, 1)`.
///
/// A Mills-ratio fixed point provides the start; Newton steps on `log Φ̄`
/// polish to near machine relative accuracy even for very small `p`.
pub fn norm_tail_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "tail probability must be in (0,1)");
    if p == 0.5 {
        return 0.0;
    }
    if p > 0.5 {
        return -norm_tail_quantile(1.0 - p);
    }
    let mut x = if p > 0.3 {
        0.0
    } else {
        // Solve x^2 + 2 ln x = -2 ln(p sqrt(2pi)), the Mills approximation.
        let l = -2.0 * (p * SQRT_2PI).ln();
        let mut x = l.sqrt();
        for _ in 0..4 {
            x = (l - 2.0 * x.ln()).max(0.25).sqrt();
        }
        x
    };
    for _ in 0..6 {
        let tail = norm_tail(x);
        if tail <= 0.0 {
            break;
        }
        // Newton on f(x) = ln Φ̄(x) − ln p;  f'(x) = −φ(x)/Φ̄(x).
        let step = (tail.ln() - p.ln()) * tail / norm_pdf(x);
        x += step;
        if step.abs() < 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Hazard rate `φ(x)/Φ̄(x)` of the standard normal; the von Mises auxiliary
/// rate of `Φ` in the Gumbel max-domain of attraction.
pub fn norm_hazard(x: f64) -> f64 {
    let tail = norm_tail(x);
    if tail > 0.0 {
        norm_pdf(x) / tail
    } else {
        // Mills asymptote for levels beyond f64 tail underflow.
        x + 1.0 / x
    }
}

/// Density of the chi distribution with `m` degrees of freedom.
pub fn chi_pdf(m: u32, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let m = f64::from(m);
    let ln = (1.0 - 0.5 * m) * std::f64::consts::LN_2 + (m - 1.0) * s.ln()
        - 0.5 * s * s
        - gamma::ln_gamma(0.5 * m);
    ln.exp()
}

/// Upper tail `P(χ_m > s)` via the regularized upper incomplete gamma.
pub fn chi_tail(m: u32, s: f64) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    gamma::gamma_ur(0.5 * f64::from(m), 0.5 * s * s)
}

/// Upper-tail quantile of the chi distribution: `s` with `chi_tail(m, s) = p`.
pub fn chi_tail_quantile(m: u32, p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "tail probability must be in (0,1)");
    // Bracket and bisect on the monotone tail; the chi tail decays like
    // exp(-s^2/2) so 2*sqrt(-ln p) + m is a safe upper bracket.
    let mut lo = 0.0f64;
    let mut hi = 2.0 * (-p.ln()).sqrt() + f64::from(m) + 1.0;
    while chi_tail(m, hi) > p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi_tail(m, mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `ln C(n, k)`.
pub fn ln_binom(n: u32, k: u32) -> f64 {
    assert!(k <= n);
    gamma::ln_gamma(f64::from(n) + 1.0)
        - gamma::ln_gamma(f64::from(k) + 1.0)
        - gamma::ln_gamma(f64::from(n - k) + 1.0)
}

/// `C(n, k)` as f64.
pub fn binom(n: u32, k: u32) -> f64 {
    ln_binom(n, k).exp().round()
}

/// Upper binomial tail `P(Bin(n, p) ≥ r)` computed term-wise in the log
/// domain, stable for `p` down to the f64 underflow range.
pub fn binomial_upper_tail(n: u32, r: u32, p: f64) -> f64 {
    assert!(r >= 1 && r <= n);
    assert!((0.0..=1.0).contains(&p));
    if p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return 1.0;
    }
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let mut sum = 0.0;
    for j in r..=n {
        let ln_term = ln_binom(n, j) + f64::from(j) * ln_p + f64::from(n - j) * ln_q;
        sum += ln_term.exp();
    }
    sum.min(1.0)
}

// Gauss-Legendre nodes/weights used by the bivariate normal routine
// (Drezner-Wesolowsky as modified by Genz; tvpack's BVND).
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705, -0.9324695142031522),
    (0.3607615730481384, -0.6612093864662647),
    (0.4679139345726904, -0.2386191860831970),
];
const GL12: [(f64, f64); 6] = [
    (0.04717533638651177, -0.9815606342467191),
    (0.1069393259953183, -0.9041172563704750),
    (0.1600783285433464, -0.7699026741943050),
    (0.2031674267230659, -0.5873179542866171),
    (0.2334925365383547, -0.3678314989981802),
    (0.2491470458134029, -0.1252334085114692),
];
const GL20: [(f64, f64); 10] = [
    (0.01761400713915212, -0.9931285991850949),
    (0.04060142980038694, -0.9639719272779138),
    (0.06267204833410906, -0.9122344282513259),
    (0.08327674157670475, -0.8391169718222188),
    (0.1019301198172404, -0.7463319064601508),
    (0.1181945319615184, -0.6360536807265150),
    (0.1316886384491766, -0.5108670019508271),
    (0.1420961093183821, -0.3737060887154196),
    (0.1491729864726037, -0.2277858511416451),
    (0.1527533871307259, -0.07652652113349733),
];

/// Bivariate standard normal upper-orthant probability
/// `P(X > h, Y > k)` for correlation `r`.
///
/// Port of Genz's BVND (Drezner-Wesolowsky with the |r| > 0.925 branch);
/// absolute accuracy about 5e-16.
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    assert!((-1.0..=1.0).contains(&r), "correlation must be in [-1,1]");
    let quad: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };

    let h = h;
    let mut k = k;
    let hk = h * k;
    let mut bvn = 0.0;

    if r.abs() <= 0.925 {
        if r.abs() > 0.0 {
            let hs = (h * h + k * k) / 2.0;
            let asr = 0.5 * r.asin();
            for &(w, x) in quad {
                for is in [-1.0f64, 1.0] {
                    let sn = (asr * (is * x + 1.0)).sin();
                    bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                }
            }
            bvn *= asr * FRAC_1_2PI;
        }
        bvn + norm_cdf(-h) * norm_cdf(-k)
    } else {
        if r < 0.0 {
            k = -k;
        }
        if r.abs() < 1.0 {
            let hk = if r < 0.0 { -hk } else { hk };
            let a_s = (1.0 - r) * (1.0 + r);
            let mut a = a_s.sqrt();
            let b_s = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            let asr = -0.5 * (b_s / a_s + hk);
            if asr > -100.0 {
                bvn = a
                    * asr.exp()
                    * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0
                        + c * d * a_s * a_s / 5.0);
            }
            if -hk < 100.0 {
                let b = b_s.sqrt();
                bvn -= (-0.5 * hk).exp()
                    * SQRT_2PI
                    * norm_cdf(-b / a)
                    * b
                    * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
            }
            a /= 2.0;
            for &(w, x) in quad {
                for is in [-1.0f64, 1.0] {
                    let x = a * (is * x + 1.0);
                    let x_s = x * x;
                    let r_s = (1.0 - x_s).sqrt();
                    let asr = -0.5 * (b_s / x_s + hk);
                    if asr > -100.0 {
                        bvn += a
                            * w
                            * asr.exp()
                            * ((-hk * (1.0 - r_s) / (2.0 * (1.0 + r_s))).exp() / r_s
                                - (1.0 + c * x_s * (1.0 + d * x_s)));
                    }
                }
            }
            bvn = -bvn * FRAC_1_2PI;
        }
        if r > 0.0 {
            bvn + norm_cdf(-h.max(k))
        } else {
            let mut v = -bvn;
            if k > h {
                v += norm_cdf(k) - norm_cdf(h);
            }
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_tail_reference_values() {
        // erfc oracle values.
        assert!((norm_tail(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_tail(2.0) - 0.022750131948179195).abs() < 1e-16);
        assert!((norm_tail(4.0) - 3.167124183311992e-5).abs() < 1e-19);
    }

    #[test]
    fn tail_quantile_roundtrip() {
        let mut p = 1e-8;
        while p <= 0.5 {
            let x = norm_tail_quantile(p);
            assert!(
                (norm_tail(x) - p).abs() <= 1e-11 * p,
                "p={p}: roundtrip {}",
                norm_tail(x)
            );
            p *= 10.0;
        }
        // Deep tail still sane.
        let x = norm_tail_quantile(1e-100);
        assert!((norm_tail(x).ln() - (1e-100f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn chi_tail_matches_normal_for_m1() {
        // |N(0,1)| tail = 2 Phibar(u).
        for u in [0.5, 1.0, 2.0, 3.0] {
            assert!((chi_tail(1, u) - 2.0 * norm_tail(u)).abs() < 1e-14);
        }
    }

    #[test]
    fn chi_quantile_roundtrip() {
        for m in [1u32, 2, 5] {
            for p in [1e-12, 1e-6, 1e-3, 0.3] {
                let s = chi_tail_quantile(m, p);
                assert!(
                    (chi_tail(m, s) - p).abs() < 1e-9 * p,
                    "m={m} p={p}: {}",
                    chi_tail(m, s)
                );
            }
        }
    }

    #[test]
    fn binomial_tail_enumeration() {
        // n=3, r=2, p=0.1 -> 3*0.01*0.9 + 0.001 = 0.028.
        assert!((binomial_upper_tail(3, 2, 0.1) - 0.028).abs() < 1e-15);
        // n=3, r=3 -> 0.001.
        assert!((binomial_upper_tail(3, 3, 0.1) - 0.001).abs() < 1e-17);
        // n=1: identity.
        assert!((binomial_upper_tail(1, 1, 0.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn bvn_zero_correlation_factorizes() {
        let p = bvn_upper(0.3, -0.7, 0.0);
        assert!((p - norm_tail(0.3) * norm_tail(-0.7)).abs() < 1e-15);
    }

    #[test]
    fn bvn_orthant_arcsine_law() {
        // P(X>0, Y>0) = 1/4 + asin(r)/(2 pi).
        for r in [-0.9f64, -0.5, 0.0, 0.3, 0.8, 0.95, 0.99] {
            let expect = 0.25 + r.asin() * FRAC_1_2PI;
            assert!(
                (bvn_upper(0.0, 0.0, r) - expect).abs() < 3e-15,
                "r={r}: {} vs {expect}",
                bvn_upper(0.0, 0.0, r)
            );
        }
    }

    #[test]
    fn bvn_perfect_correlation_limits() {
        // r=1: P(X>h, X>k) = Phibar(max(h,k)).
        assert!((bvn_upper(1.0, 2.0, 1.0) - norm_tail(2.0)).abs() < 1e-15);
        // r=-1: P(X>h, -X>k) = P(k < -X, X > h) = max(0, Phi(-k)-Phi(h)).
        let expect = (norm_cdf(-0.5) - norm_cdf(-1.0)).max(0.0);
        assert!((bvn_upper(-1.0, 0.5, -1.0) - expect).abs() < 1e-15);
    }

    #[test]
    fn bvn_monotone_in_levels() {
        let mut last = 1.0;
        for h in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let p = bvn_upper(h, 0.4, 0.6);
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn bvn_near_one_correlation_consistency() {
        // Against the conditional-decomposition quadrature oracle:
        // P(X>h, Y>k) = ∫_h^∞ φ(x) Φ̄((k-r x)/sqrt(1-r²)) dx.
        for (h, k, r) in [(4.0f64, 4.0f64, 0.98f64), (3.0, 3.2, 0.96), (2.0, 1.0, 0.93)] {
            let s = (1.0 - r * r).sqrt();
            let oracle = crate::quad::integrate(
                |x: f64| norm_pdf(x) * norm_tail((k - r * x) / s),
                h,
                h + 12.0,
                1e-12,
                1e-18,
            )
            .unwrap();
            let got = bvn_upper(h, k, r);
            assert!(
                (got - oracle).abs() < 1e-12 * oracle.max(1e-30),
                "({h},{k},{r}): {got} vs {oracle}"
            );
        }
    }
}

