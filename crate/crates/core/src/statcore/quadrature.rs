//! Gauss-Legendre quadrature, adaptive interval integration, and integration
//! against a probability density with tail cut-offs.

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// A Gauss-Legendre rule on the reference interval [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    /// Smallest rule the library is willing to construct.
    pub const MIN_NODES: usize = 16;

    /// Gauss-Legendre rule with `n >= 16` nodes, exact for polynomials of degree `2n - 1`.
    pub fn gauss_legendre(n: usize) -> Result<Self> {
        if n < Self::MIN_NODES {
            return Err(Error::domain(format!(
                "quadrature rule needs at least {} nodes, got {n}",
                Self::MIN_NODES
            )));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for j in 2..=n {
                    let jf = j as f64;
                    let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = nf * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Ok(Quadrature { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Highest polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        2 * self.nodes.len() - 1
    }

    /// Apply the rule to `f` on `[a, b]` by the affine map from [-1, 1].
    pub fn apply(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

pub(crate) fn gl16() -> &'static Quadrature {
    static RULE: OnceLock<Quadrature> = OnceLock::new();
    RULE.get_or_init(|| Quadrature::gauss_legendre(16).expect("16 nodes is valid"))
}

const MAX_DEPTH: u32 = 48;

/// Adaptive Gauss-Legendre integration of a smooth (or piecewise smooth) function on `[a, b]`.
pub fn integrate_interval(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rule = gl16();
    let whole = rule.apply(&f, a, b);
    let mut failed = 0.0;
    let v = adapt(&f, rule, a, b, whole, abs_tol, 0, &mut failed);
    if failed > 0.0 {
        return Err(Error::NoConvergence { error_estimate: failed });
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn adapt(
    f: &impl Fn(f64) -> f64,
    rule: &Quadrature,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    failed: &mut f64,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.apply(f, a, mid);
    let right = rule.apply(f, mid, b);
    let diff = (left + right - whole).abs();
    if diff <= tol || mid <= a || mid >= b {
        return left + right;
    }
    if depth >= MAX_DEPTH {
        *failed += diff;
        return left + right;
    }
    adapt(f, rule, a, mid, left, 0.5 * tol, depth + 1, failed)
        + adapt(f, rule, mid, b, right, 0.5 * tol, depth + 1, failed)
}

/// A probability density usable as an integration weight.
pub trait Weight {
    fn pdf(&self, x: f64) -> f64;
    fn quantile(&self, p: f64) -> Result<f64>;
}

/// Where to cut the infinite domain and how hard to refine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPolicy {
    /// Probability mass dropped from each tail of the weight.
    pub tail_mass: f64,
    /// Target absolute error of the integral.
    pub abs_tol: f64,
    /// Number of uniform panels the truncated domain starts with.
    pub base_panels: usize,
    /// Maximum number of global panel doublings.
    pub max_doublings: u32,
}

impl Default for TailPolicy {
    fn default() -> Self {
        TailPolicy {
            tail_mass: 1e-9,
            abs_tol: 1e-7,
            base_panels: 64,
            max_doublings: 14,
        }
    }
}

/// Value of a weighted integral together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
}

/// ∫ f(x) w(x) dx over the support of `weight`.
///
/// The domain is cut at the `tail_mass` and `1 - tail_mass` quantiles of the
/// weight and covered by a composite 16-point rule whose panels are halved
/// until two successive sums agree to `abs_tol`. Bounded step functions
/// converge, if slowly; when the jump locations are known, pass them to
/// [`integrate_piecewise`] instead.
pub fn integrate<W: Weight + ?Sized>(f: impl Fn(f64) -> f64, weight: &W, policy: &TailPolicy) -> Result<Integral> {
    integrate_piecewise(f, weight, &[], policy)
}

/// Like [`integrate`], with panel edges forced onto each of `breaks` that lies
/// inside the truncated domain. For `f` constant between breaks, convergence is immediate.
pub fn integrate_piecewise<W: Weight + ?Sized>(
    f: impl Fn(f64) -> f64,
    weight: &W,
    breaks: &[f64],
    policy: &TailPolicy,
) -> Result<Integral> {
    if !(policy.tail_mass > 0.0 && policy.tail_mass < 0.5) {
        return Err(Error::domain("tail mass must lie in (0, 0.5)"));
    }
    let lo = weight.quantile(policy.tail_mass)?;
    let hi = weight.quantile(1.0 - policy.tail_mass)?;
    if !(hi > lo) {
        return Err(Error::domain(format!("degenerate weight support [{lo}, {hi}]")));
    }
    let base = policy.base_panels.max(1);
    let mut edges: Vec<f64> = (0..=base).map(|i| lo + (hi - lo) * i as f64 / base as f64).collect();
    edges.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
    edges.sort_by(|a, b| a.partial_cmp(b).expect("finite edges"));
    edges.dedup();

    let rule = gl16();
    let g = |x: f64| f(x) * weight.pdf(x);
    let sum_at = |level: u32| -> f64 {
        let parts = 1usize << level;
        let mut total = 0.0;
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let step = (b - a) / parts as f64;
            for p in 0..parts {
                let pa = a + step * p as f64;
                let pb = if p + 1 == parts { b } else { pa + step };
                total += rule.apply(g, pa, pb);
            }
        }
        total
    };

    let mut prev = sum_at(0);
    let mut diff = f64::INFINITY;
    for level in 1..=policy.max_doublings {
        let next = sum_at(level);
        diff = (next - prev).abs();
        prev = next;
        if diff <= policy.abs_tol {
            return Ok(Integral {
                value: next,
                error_estimate: diff,
            });
        }
    }
    Err(Error::NoConvergence { error_estimate: diff })
}
