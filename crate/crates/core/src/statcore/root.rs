//! Bracketed root finding.

use crate::error::{Error, Result};

const MAX_ITER: usize = 500;

/// Brent's method on `[lo, hi]`.
///
/// Returns `x` with `|g(x)| <= tol` or with the surviving bracket narrower than
/// `tol`. The bracket is maintained throughout, so a monotone step function
/// converges to its jump point.
pub fn find_root(g: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::domain("root tolerance must be positive"));
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (g(a), g(b));
    if fa.abs() <= tol {
        return Ok(a);
    }
    if fb.abs() <= tol {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if fb.abs() <= tol || xm.abs() <= tol1 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = g(b);
    }
    Err(Error::NoConvergence {
        error_estimate: (c - b).abs(),
    })
}

/// [`find_root`] after widening `[lo, hi]` towards `[min_lo, max_hi]` until the
/// function changes sign. Each widening step doubles the distance to the limits' side.
pub fn find_root_expanding(g: impl Fn(f64) -> f64, bracket: (f64, f64), limits: (f64, f64), tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    let (min_lo, max_hi) = limits;
    let (mut glo, mut ghi) = (g(lo), g(hi));
    loop {
        if glo.abs() <= tol {
            return Ok(lo);
        }
        if ghi.abs() <= tol {
            return Ok(hi);
        }
        if glo.signum() != ghi.signum() {
            return find_root(&g, lo, hi, tol);
        }
        if lo <= min_lo && hi >= max_hi {
            return Err(Error::NoSignChange { lo, hi });
        }
        let width = hi - lo;
        if lo > min_lo {
            lo = (lo - width).max(min_lo);
            glo = g(lo);
        }
        if hi < max_hi {
            hi = (hi + width).min(max_hi);
            ghi = g(hi);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_and_quadratic() {
        let r = find_root(|x| x - 2.0, 0.0, 10.0, 1e-12).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
        let r = find_root(|x| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn step_function_converges_to_jump() {
        let r = find_root(|x| if x < 0.3 { -1.0 } else { 1.0 }, 0.0, 1.0, 1e-10).unwrap();
        assert!((r - 0.3).abs() < 1e-9);
    }

    #[test]
    fn no_sign_change() {
        assert!(matches!(
            find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-8),
            Err(Error::NoSignChange { .. })
        ));
    }

    #[test]
    fn expansion_finds_far_root() {
        let r = find_root_expanding(|x| x - 9.0, (0.5, 4.0), (0.1, 16.0), 1e-10).unwrap();
        assert!((r - 9.0).abs() < 1e-9);
        assert!(find_root_expanding(|x| x - 20.0, (0.5, 4.0), (0.1, 16.0), 1e-10).is_err());
    }
}
