//! Student's t distribution for real-valued degrees of freedom.

use super::normal::{norm_cdf, norm_quantile};
use super::special::{beta_inc_with_lnbeta, ln_gamma_half_ratio};
use crate::error::{Error, Result};

const LN_SQRT_PI: f64 = 0.572_364_942_924_700_1;

// Above this the t law is replaced by its Cornish-Fisher expansion around the normal.
const LARGE_NU: f64 = 1e7;

fn ln_beta_half(nu: f64) -> f64 {
    // ln B(nu/2, 1/2) = ln Γ(nu/2) + ln Γ(1/2) - ln Γ(nu/2 + 1/2)
    LN_SQRT_PI - ln_gamma_half_ratio(0.5 * nu)
}

/// Density of Student's t with `nu` degrees of freedom.
pub fn t_pdf(x: f64, nu: f64) -> f64 {
    let ln = -ln_beta_half(nu) - 0.5 * nu.ln() - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p();
    ln.exp()
}

/// Lower-tail distribution function of Student's t.
pub fn t_cdf(x: f64, nu: f64) -> f64 {
    if x.is_nan() || nu.is_nan() || nu <= 0.0 {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if nu > LARGE_NU {
        // Fisher's correction to first order in 1/nu.
        let z = x * (1.0 - 1.0 / (4.0 * nu)) / (1.0 + x * x / (2.0 * nu)).sqrt();
        return norm_cdf(z);
    }
    let t2 = x * x;
    // P(|T| > |x|) = I_{nu/(nu+x^2)}(nu/2, 1/2)
    let tail = if t2 < nu {
        1.0 - beta_inc_with_lnbeta(0.5, 0.5 * nu, t2 / (nu + t2), ln_beta_half(nu))
    } else {
        beta_inc_with_lnbeta(0.5 * nu, 0.5, nu / (nu + t2), ln_beta_half(nu))
    };
    if x < 0.0 {
        0.5 * tail
    } else {
        1.0 - 0.5 * tail
    }
}

fn cornish_fisher(z: f64, nu: f64) -> f64 {
    let z2 = z * z;
    let g1 = (z2 + 1.0) * z / 4.0;
    let g2 = ((5.0 * z2 + 16.0) * z2 + 3.0) * z / 96.0;
    let g3 = (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) * z / 384.0;
    let g4 = ((((79.0 * z2 + 776.0) * z2 + 1482.0) * z2 - 1920.0) * z2 - 945.0) * z / 92160.0;
    z + g1 / nu + g2 / nu.powi(2) + g3 / nu.powi(3) + g4 / nu.powi(4)
}

/// Lower `p`-quantile of Student's t with `nu` degrees of freedom.
///
/// `nu` may be non-integral. `t_quantile(0.025, nu)` is negative.
pub fn t_quantile(p: f64, nu: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("t_quantile: p = {p} outside (0, 1)")));
    }
    if !(nu > 0.0) {
        return Err(Error::domain(format!("t_quantile: nu = {nu} must be positive")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let z = norm_quantile(p);
    if nu > LARGE_NU || nu.is_infinite() {
        return Ok(if nu.is_infinite() { z } else { cornish_fisher(z, nu) });
    }
    if nu == 1.0 {
        return Ok((std::f64::consts::PI * (p - 0.5)).tan());
    }
    if nu == 2.0 {
        return Ok((2.0 * p - 1.0) / (2.0 * p * (1.0 - p)).sqrt());
    }

    // Work on the lower half and reflect; the lower tail keeps the most precision.
    let (lower_p, sign) = if p > 0.5 { (1.0 - p, -1.0) } else { (p, 1.0) };
    let target = lower_p;

    // Bracket [lo, hi] with cdf(lo) <= target <= cdf(hi), hi <= 0.
    let mut hi = 0.0;
    let guess = if nu >= 3.0 {
        cornish_fisher(norm_quantile(lower_p), nu).min(-1e-300)
    } else {
        -1.0
    };
    let mut lo = guess.min(-1.0);
    while t_cdf(lo, nu) > target {
        hi = lo;
        lo *= 2.0;
        if !lo.is_finite() {
            return Err(Error::NoConvergence {
                error_estimate: f64::INFINITY,
            });
        }
    }
    let mut x = guess.clamp(lo, hi);
    // Newton steps in the log-cdf, falling back to bisection when a step leaves the bracket.
    for _ in 0..200 {
        let f = t_cdf(x, nu);
        let diff = f - target;
        if diff == 0.0 {
            break;
        }
        if diff > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let pdf = t_pdf(x, nu);
        let step = if f > 0.0 && pdf > 0.0 {
            (f.ln() - target.ln()) * f / pdf
        } else {
            f64::NAN
        };
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(sign * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_is_zero() {
        assert_eq!(t_quantile(0.5, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_small_df() {
        // nu = 1 is Cauchy
        assert!((t_cdf(1.0, 1.0) - 0.75).abs() < 1e-14);
        assert!((t_quantile(0.975, 1.0).unwrap() - 12.706_204_736_174_7).abs() < 1e-9);
        // nu = 2: F(x) = 1/2 + x / (2 sqrt(2 + x^2))
        let x: f64 = -1.3;
        let exact = 0.5 + x / (2.0 * (2.0 + x * x).sqrt());
        assert!((t_cdf(x, 2.0) - exact).abs() < 1e-14);
    }

    #[test]
    fn fractional_df_round_trip() {
        for &nu in &[0.5, 1.7, 3.3, 12.25, 347.66, 5000.5] {
            for &p in &[1e-6, 0.01, 0.025, 0.2, 0.6, 0.99] {
                let q = t_quantile(p, nu).unwrap();
                let back = t_cdf(q, nu);
                assert!(((back - p) / p).abs() < 1e-10, "nu={nu} p={p} q={q} back={back}");
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(t_quantile(0.0, 3.0).is_err());
        assert!(t_quantile(1.0, 3.0).is_err());
        assert!(t_quantile(0.3, 0.0).is_err());
        assert!(t_quantile(0.3, -2.0).is_err());
    }
}
