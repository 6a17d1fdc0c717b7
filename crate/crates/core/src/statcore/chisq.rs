//! Central and noncentral chi-squared distributions.
//!
//! The noncentral law is evaluated as a Poisson(λ/2) mixture of central
//! chi-squared laws with `k + 2j` degrees of freedom. Summation starts at the
//! largest mixture term and walks outward in both directions, so no term is
//! ever formed outside of log space and λ up to 1e4 is safe.

use super::special::{gamma_p, gamma_q, ln_gamma};
use crate::error::{Error, Result};

const LN_2: f64 = std::f64::consts::LN_2;
// Relative size below which a mixture term no longer matters.
const SERIES_EPS: f64 = 1e-17;

fn check(x: f64, k: f64, lambda: f64) -> Result<()> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("chi-squared: x = {x} must be nonnegative")));
    }
    if !(k > 0.0) {
        return Err(Error::domain(format!("chi-squared: k = {k} must be positive")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!(
            "chi-squared: lambda = {lambda} must be nonnegative"
        )));
    }
    Ok(())
}

/// ln of the central chi-squared density; `-inf` where the density vanishes.
fn ln_central_pdf(x: f64, k: f64) -> f64 {
    if x == 0.0 {
        return if k < 2.0 {
            f64::INFINITY
        } else if k == 2.0 {
            -LN_2
        } else {
            f64::NEG_INFINITY
        };
    }
    let h = 0.5 * k;
    (h - 1.0) * x.ln() - 0.5 * x - h * LN_2 - ln_gamma(h)
}

/// Central chi-squared density.
pub fn chisq_pdf(x: f64, k: f64) -> Result<f64> {
    check(x, k, 0.0)?;
    Ok(ln_central_pdf(x, k).exp())
}

/// Central chi-squared distribution function.
pub fn chisq_cdf(x: f64, k: f64) -> Result<f64> {
    check(x.max(0.0), k, 0.0)?;
    Ok(gamma_p(0.5 * k, 0.5 * x.max(0.0)))
}

fn ln_poisson(j: f64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if j == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    j * mean.ln() - mean - ln_gamma(j + 1.0)
}

/// Sum `exp(term(j))` over j >= 0, starting at `start` and walking outward
/// until terms drop below `SERIES_EPS` of the running total on both sides.
fn mixture_sum(start: u64, term: impl Fn(u64) -> f64) -> f64 {
    let start = if term(start) == f64::NEG_INFINITY { 0 } else { start };
    let ln_ref = term(start);
    if ln_ref == f64::NEG_INFINITY {
        return 0.0;
    }
    let mut sum = 1.0;
    // upward
    let mut j = start + 1;
    let mut prev = 0.0;
    loop {
        let t = (term(j) - ln_ref).exp();
        sum += t;
        // terms are eventually decreasing; stop once tiny and shrinking
        if t < SERIES_EPS * sum && t <= prev {
            break;
        }
        prev = t;
        j += 1;
        if j > start + 10_000_000 {
            break;
        }
    }
    // downward
    let mut j = start;
    prev = 0.0;
    while j > 0 {
        j -= 1;
        let t = (term(j) - ln_ref).exp();
        sum += t;
        if t < SERIES_EPS * sum && t <= prev {
            break;
        }
        prev = t;
    }
    sum * ln_ref.exp()
}

/// Noncentral chi-squared density with `k` degrees of freedom and
/// noncentrality `lambda`. Reduces exactly to the central density at λ = 0.
pub fn chisq_noncentral_pdf(x: f64, k: f64, lambda: f64) -> Result<f64> {
    check(x, k, lambda)?;
    if lambda == 0.0 {
        return chisq_pdf(x, k);
    }
    if x == 0.0 {
        // only the j = 0 term can be nonzero
        return Ok((ln_poisson(0.0, 0.5 * lambda) + ln_central_pdf(0.0, k)).exp());
    }
    let half = 0.5 * lambda;
    // Ratio of consecutive terms: (λ/2)(x/2) / ((j+1)(k/2+j)); the peak sits where it crosses 1.
    let c = 0.25 * lambda * x;
    let b = 0.5 * k + 1.0;
    let peak = ((-b + (b * b - 4.0 * (0.5 * k - c)).max(0.0).sqrt()) / 2.0).max(0.0);
    let start = peak.round() as u64;
    let term = |j: u64| {
        let jf = j as f64;
        ln_poisson(jf, half) + ln_central_pdf(x, k + 2.0 * jf)
    };
    Ok(mixture_sum(start, term))
}

/// Noncentral chi-squared distribution function.
pub fn chisq_noncentral_cdf(x: f64, k: f64, lambda: f64) -> Result<f64> {
    if x <= 0.0 {
        check(0.0, k, lambda)?;
        return Ok(0.0);
    }
    check(x, k, lambda)?;
    if lambda == 0.0 {
        return chisq_cdf(x, k);
    }
    let half = 0.5 * lambda;
    let start = half.floor() as u64;
    // Upper-tail form when x is beyond the bulk keeps relative accuracy there.
    let mean = k + lambda;
    if x > mean {
        let tail = mixture_sum(start, |j| {
            let jf = j as f64;
            ln_poisson(jf, half) + gamma_q(0.5 * k + jf, 0.5 * x).ln()
        });
        Ok((1.0 - tail).clamp(0.0, 1.0))
    } else {
        let head = mixture_sum(start, |j| {
            let jf = j as f64;
            ln_poisson(jf, half) + gamma_p(0.5 * k + jf, 0.5 * x).ln()
        });
        Ok(head.clamp(0.0, 1.0))
    }
}
