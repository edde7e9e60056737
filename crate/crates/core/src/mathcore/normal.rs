//! Standard normal distribution functions.
//!
//! The checked entry points (`std_normal_cdf`, `std_normal_quantile`) reject
//! inputs outside their domain; the unchecked ones are used on hot paths
//! where the arguments are already known to be valid.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// 1 / sqrt(2π)
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Φ(x). Returns an error for non-finite input.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("normal cdf argument must be finite, got {x}")));
    }
    Ok(cdf(x))
}

/// Φ⁻¹(u) for u in the open unit interval.
pub fn std_normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("normal quantile needs 0 < u < 1, got {u}")));
    }
    Ok(quantile(u))
}

#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail 1 − Φ(x), accurate far into the right tail.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Unchecked quantile. Rational seed (Acklam) plus one Newton step.
pub fn quantile(u: f64) -> f64 {
    if u > 0.5 {
        // 1 − u is exact on [0.5, 1]
        return -lower_quantile(1.0 - u);
    }
    lower_quantile(u)
}

fn lower_quantile(u: f64) -> f64 {
    if u == 0.5 {
        return 0.0;
    }
    let x = acklam_seed(u);
    // Newton against Φ; both Φ(x) and u are small here so the residual
    // keeps its relative accuracy.
    let resid = cdf(x) - u;
    x - resid / pdf(x)
}

fn acklam_seed(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Density of N(mean, sd²) at x.
#[inline]
pub fn density(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// erf by its Maclaurin series for |x| ≤ 3 and the Laplace continued
    /// fraction for erfc beyond; independent of libm.
    fn erf_oracle(x: f64) -> f64 {
        if x.abs() <= 3.0 {
            let mut term = x;
            let mut sum = x;
            let x2 = x * x;
            let mut n = 0.0;
            while term.abs() > 1e-20 * sum.abs().max(1e-300) {
                n += 1.0;
                term *= -x2 / n;
                sum += term / (2.0 * n + 1.0);
            }
            2.0 / PI.sqrt() * sum
        } else {
            let s = x.signum();
            let a = x.abs();
            // erfc(a) = exp(-a²)/sqrt(π) · 1/(a + 1/2/(a + 1/(a + 3/2/(a + ...))))
            let mut frac = 0.0;
            for k in (1..200).rev() {
                frac = (k as f64 / 2.0) / (a + frac);
            }
            let erfc = (-a * a).exp() / PI.sqrt() / (a + frac);
            s * (1.0 - erfc)
        }
    }

    fn phi_oracle(x: f64) -> f64 {
        0.5 * (1.0 + erf_oracle(x * FRAC_1_SQRT_2))
    }

    #[test]
    fn cdf_reference_values() {
        assert_eq!(cdf(0.0), 0.5);
        // high-precision reference values
        assert!((cdf(1.96) - 0.975_002_104_851_779_6).abs() < 1e-12);
        assert!((cdf(-1.645) - 0.049_984_905_539_121_37).abs() < 1e-12);
    }

    #[test]
    fn cdf_matches_series_oracle() {
        let mut x = -8.0;
        while x <= 8.0 {
            assert!((cdf(x) - phi_oracle(x)).abs() < 1e-12, "x={x}");
            x += 0.0625;
        }
    }

    #[test]
    fn symmetry() {
        let mut x = -10.0;
        while x <= 10.0 {
            assert!((cdf(x) + cdf(-x) - 1.0).abs() < 1e-14, "x={x}");
            x += 0.01;
        }
    }

    #[test]
    fn quantile_reference_values() {
        assert_eq!(quantile(0.5), 0.0);
        assert!((quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((quantile(0.95) - 1.644_853_626_951_472_7).abs() < 1e-9);
    }

    #[test]
    fn quantile_matches_bisection_oracle() {
        for &u in &[0.001, 0.025, 0.3, 0.7, 0.95, 0.975, 0.999] {
            let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if phi_oracle(mid) < u {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert!((quantile(u) - 0.5 * (lo + hi)).abs() < 1e-9, "u={u}");
        }
    }

    #[test]
    fn quantile_round_trip_grid() {
        let mut exps = Vec::new();
        for k in 1..=10 {
            exps.push(10f64.powi(-k));
        }
        let mut us: Vec<f64> = exps.iter().copied().collect();
        us.extend(exps.iter().map(|e| 1.0 - e));
        us.extend((1..1000).map(|i| i as f64 / 1000.0));
        for u in us {
            let x = quantile(u);
            assert!((cdf(x) - u).abs() < 1e-12, "u={u} x={x}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_cdf(f64::INFINITY).is_err());
        assert!(std_normal_quantile(0.0).is_err());
        assert!(std_normal_quantile(1.0).is_err());
        assert!(std_normal_quantile(-0.2).is_err());
    }
}
