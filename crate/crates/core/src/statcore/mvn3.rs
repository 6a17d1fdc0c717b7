//! Trivariate normal distribution function.
//!
//! `P(Z1 <= u1, Z2 <= u2, Z3 <= u3)` is reduced to a one-dimensional integral
//! by conditioning on one coordinate:
//!
//! ```text
//! ∫_{-∞}^{u_c} φ(z) Φ2((u_i - r_ci z)/s_i, (u_j - r_cj z)/s_j; ρ) dz
//! ```
//!
//! with `s = sqrt(1 - r²)` and `ρ` the conditional correlation. Singular
//! matrices are allowed. When `|ρ| = 1` the integrand has a kink where the two
//! conditional limits meet; that point is located in closed form and used as a
//! panel edge of the adaptive rule.

use super::bvn::{bvn_cdf, DEGENERATE_RHO};
use super::normal::{norm_cdf, norm_pdf};
use super::quadrature::integrate_interval;
use crate::error::{Error, Result};

/// Off-diagonal entries of a 3×3 correlation matrix with unit diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corr3 {
    pub r12: f64,
    pub r13: f64,
    pub r23: f64,
}

/// Eigenvalues below this are treated as a failed positive semidefiniteness check.
pub const PSD_TOLERANCE: f64 = -1e-10;

impl Corr3 {
    /// Validated constructor.
    pub fn new(r12: f64, r13: f64, r23: f64) -> Result<Self> {
        let c = Corr3 { r12, r13, r23 };
        c.validate()?;
        Ok(c)
    }

    pub const IDENTITY: Corr3 = Corr3 {
        r12: 0.0,
        r13: 0.0,
        r23: 0.0,
    };

    /// Eigenvalues of the full matrix, ascending.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let (a, b, c) = (self.r12, self.r13, self.r23);
        // Trigonometric solution of the characteristic polynomial of a symmetric matrix with trace 3.
        let p1 = a * a + b * b + c * c;
        if p1 == 0.0 {
            return [1.0; 3];
        }
        let p = (2.0 * p1 / 6.0).sqrt();
        // B = (A - I)/p has zero diagonal
        let det_b = 2.0 * a * b * c / (p * p * p);
        let phi = (det_b / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
        let e1 = 1.0 + 2.0 * p * phi.cos();
        let e3 = 1.0 + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 - e1 - e3;
        let mut e = [e1, e2, e3];
        e.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
        e
    }

    /// Checks the entries are finite, within [-1, 1], and the matrix is PSD.
    pub fn validate(&self) -> Result<()> {
        for r in [self.r12, self.r13, self.r23] {
            if !r.is_finite() || r.abs() > 1.0 + 1e-12 {
                return Err(Error::domain(format!("correlation {r} outside [-1, 1]")));
            }
        }
        let min = self.eigenvalues()[0];
        if min < PSD_TOLERANCE {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
        }
        Ok(())
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        match (i.min(j), i.max(j)) {
            (0, 1) => self.r12,
            (0, 2) => self.r13,
            (1, 2) => self.r23,
            _ => 1.0,
        }
    }
}

// Absolute tolerance handed to the outer adaptive rule; well below the 1e-7 contract.
const OUTER_TOL: f64 = 1e-12;
// Below this the standard normal density contributes nothing at double precision.
const LOWER_CUT: f64 = -10.0;
// Limits above this are replaced by +∞; the dropped tail mass is below 1e-23.
const UPPER_CUT: f64 = 10.0;

/// `P(Z1 <= u1, Z2 <= u2, Z3 <= u3)` for `Z ~ N3(0, corr)`. Entries of `upper`
/// may be infinite. Absolute accuracy is better than 1e-7.
pub fn mvn3_cdf(upper: [f64; 3], corr: &Corr3) -> Result<f64> {
    corr.validate()?;
    if upper.iter().any(|u| u.is_nan()) {
        return Err(Error::domain("NaN integration limit"));
    }
    if upper.contains(&f64::NEG_INFINITY) {
        return Ok(0.0);
    }
    let upper = upper.map(|u| if u > UPPER_CUT { f64::INFINITY } else { u });
    let finite: Vec<usize> = (0..3).filter(|&i| upper[i].is_finite()).collect();
    match finite.len() {
        0 => Ok(1.0),
        1 => Ok(norm_cdf(upper[finite[0]])),
        2 => {
            let (i, j) = (finite[0], finite[1]);
            Ok(bvn_cdf(upper[i], upper[j], corr.get(i, j)))
        }
        _ => trivariate(upper, corr),
    }
}

fn clamp_rho(r: f64) -> f64 {
    r.clamp(-1.0, 1.0)
}

fn trivariate(u: [f64; 3], corr: &Corr3) -> Result<f64> {
    // A pair with |r| = 1 collapses the problem to two dimensions.
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let r = corr.get(i, j);
        if r.abs() >= DEGENERATE_RHO {
            let k = 3 - i - j;
            let rik = clamp_rho(corr.get(i, k));
            return Ok(if r > 0.0 {
                // Zi = Zj
                bvn_cdf(u[i].min(u[j]), u[k], rik)
            } else {
                // Zj = -Zi: the event is -u[j] <= Zi <= u[i]
                if u[i] <= -u[j] {
                    0.0
                } else {
                    (bvn_cdf(u[i], u[k], rik) - bvn_cdf(-u[j], u[k], rik)).max(0.0)
                }
            });
        }
    }

    // Condition on the coordinate least correlated with the other two.
    let c = (0..3)
        .min_by(|&a, &b| {
            let ma = (0..3)
                .filter(|&o| o != a)
                .map(|o| corr.get(a, o).abs())
                .fold(0.0, f64::max);
            let mb = (0..3)
                .filter(|&o| o != b)
                .map(|o| corr.get(b, o).abs())
                .fold(0.0, f64::max);
            ma.partial_cmp(&mb).expect("finite correlations")
        })
        .expect("three coordinates");
    let (i, j) = match c {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (rci, rcj, rij) = (corr.get(c, i), corr.get(c, j), corr.get(i, j));
    let si = (1.0 - rci * rci).sqrt();
    let sj = (1.0 - rcj * rcj).sqrt();
    let rho = clamp_rho((rij - rci * rcj) / (si * sj));

    let upper = u[c];
    if upper <= LOWER_CUT {
        return Ok(0.0);
    }
    let h = |z: f64| (u[i] - rci * z) / si;
    let k = |z: f64| (u[j] - rcj * z) / sj;
    let integrand = |z: f64| norm_pdf(z) * bvn_cdf(h(z), k(z), rho);

    // Kinks of the degenerate conditional law: h(z) = k(z) (ρ = 1) or h(z) = -k(z) (ρ = -1).
    let mut edges = vec![LOWER_CUT, upper];
    if rho.abs() >= DEGENERATE_RHO {
        let (slope, offset) = if rho > 0.0 {
            (-rci / si + rcj / sj, u[i] / si - u[j] / sj)
        } else {
            (-rci / si - rcj / sj, u[i] / si + u[j] / sj)
        };
        if slope != 0.0 {
            let z0 = -offset / slope;
            if z0 > LOWER_CUT && z0 < upper {
                edges.insert(1, z0);
            }
        }
    }
    let span = upper - LOWER_CUT;
    let mut total = 0.0;
    for pair in edges.windows(2) {
        let tol = OUTER_TOL * (pair[1] - pair[0]) / span;
        total += integrate_interval(integrand, pair[0], pair[1], tol.max(1e-15))?;
    }
    Ok(total.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_mass_and_independent_orthant() {
        let c = Corr3::new(-0.5, 0.5, 0.5).unwrap();
        let inf = f64::INFINITY;
        assert_eq!(mvn3_cdf([inf, inf, inf], &c).unwrap(), 1.0);
        let v = mvn3_cdf([0.0, 0.0, 0.0], &Corr3::IDENTITY).unwrap();
        assert!((v - 0.125).abs() < 1e-12);
    }

    #[test]
    fn nonsingular_orthant_closed_form() {
        // P(all <= 0) = 1/8 + (asin r12 + asin r13 + asin r23)/(4π)
        let (a, b, c) = (0.3, -0.2, 0.45);
        let want = 0.125 + (f64::asin(a) + f64::asin(b) + f64::asin(c)) / (4.0 * std::f64::consts::PI);
        let got = mvn3_cdf([0.0; 3], &Corr3::new(a, b, c).unwrap()).unwrap();
        assert!((got - want).abs() < 1e-11, "{got} vs {want}");
    }

    #[test]
    fn singular_orthant_closed_form() {
        // The closed form also holds on the boundary of the PSD cone.
        let want = 0.125 + (f64::asin(-0.5) + 2.0 * f64::asin(0.5)) / (4.0 * std::f64::consts::PI);
        let got = mvn3_cdf([0.0; 3], &Corr3::new(-0.5, 0.5, 0.5).unwrap()).unwrap();
        assert!((got - want).abs() < 1e-11, "{got} vs {want}");
        assert!((want - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn pairwise_degenerate_reduces_to_bivariate() {
        let c = Corr3::new(1.0, 0.3, 0.3).unwrap();
        let got = mvn3_cdf([0.4, 0.9, -0.2], &c).unwrap();
        assert!((got - bvn_cdf(0.4, -0.2, 0.3)).abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let err = Corr3::new(0.9, 0.9, -0.9).unwrap_err();
        assert!(matches!(err, Error::NotPositiveSemidefinite { .. }));
        assert!(Corr3::new(1.2, 0.0, 0.0).is_err());
    }

    #[test]
    fn dropping_infinite_limits() {
        let c = Corr3::new(0.2, 0.4, -0.1).unwrap();
        let inf = f64::INFINITY;
        assert_eq!(mvn3_cdf([0.3, inf, inf], &c).unwrap(), norm_cdf(0.3));
        assert_eq!(mvn3_cdf([0.3, -inf, 1.0], &c).unwrap(), 0.0);
        assert_eq!(mvn3_cdf([0.3, inf, 1.0], &c).unwrap(), bvn_cdf(0.3, 1.0, 0.4));
    }
}
