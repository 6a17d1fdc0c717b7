//! Fixed-design power and sample size for the three-arm non-inferiority design.
//!
//! The global null `H0 = H0^ER ∪ H0^EP ∪ H0^RP` is tested as an
//! intersection-union test, so each local hypothesis is tested at the full level
//! `α`. The power of the global test is approximated by a trivariate normal
//! probability whose correlation depends only on the group size ratios.

use crate::error::{Error, Result};
use crate::statcore::{find_root, mvn3_cdf, norm_quantile, t_quantile, Corr3};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Treatment arm: experimental, reference (active control) or placebo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    E,
    R,
    P,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::E, Arm::R, Arm::P];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::E => "E",
            Arm::R => "R",
            Arm::P => "P",
        })
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "E" | "e" => Ok(Arm::E),
            "R" | "r" => Ok(Arm::R),
            "P" | "p" => Ok(Arm::P),
            other => Err(Error::domain(format!("unknown arm {other:?}, expected E, R or P"))),
        }
    }
}

/// Integer allocation ratio `n_E : n_R : n_P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AllocationRatio {
    parts: [u64; 3],
}

impl AllocationRatio {
    pub fn new(e: u64, r: u64, p: u64) -> Result<Self> {
        if e == 0 || r == 0 || p == 0 {
            return Err(Error::domain("allocation parts must be at least 1"));
        }
        Ok(AllocationRatio { parts: [e, r, p] })
    }

    /// 1:1:1.
    pub fn balanced() -> Self {
        AllocationRatio { parts: [1, 1, 1] }
    }

    pub fn parts(&self) -> [u64; 3] {
        self.parts
    }

    /// Sum of the parts, which is also the size of one randomization block.
    pub fn block_size(&self) -> u64 {
        self.parts.iter().sum()
    }

    pub fn weights(&self) -> [f64; 3] {
        let s = self.block_size() as f64;
        self.parts.map(|r| r as f64 / s)
    }
}

impl fmt::Display for AllocationRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [e, r, p] = self.parts;
        write!(f, "{e}:{r}:{p}")
    }
}

impl FromStr for AllocationRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        if parts.len() != 3 {
            return Err(Error::domain(format!("allocation {s:?} is not of the form e:r:p")));
        }
        let mut v = [0u64; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .trim()
                .parse()
                .map_err(|_| Error::domain(format!("allocation part {p:?} is not a positive integer")))?;
        }
        AllocationRatio::new(v[0], v[1], v[2])
    }
}

impl Serialize for AllocationRatio {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AllocationRatio {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-arm sample sizes. Real-valued while searching, integral once realized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSizes {
    pub e: f64,
    pub r: f64,
    pub p: f64,
}

impl GroupSizes {
    pub fn new(e: f64, r: f64, p: f64) -> Result<Self> {
        let g = GroupSizes { e, r, p };
        g.check_positive()?;
        Ok(g)
    }

    /// `w_k · total` for each arm, not rounded.
    pub fn from_total(total: f64, alloc: &AllocationRatio) -> Self {
        let [e, r, p] = alloc.weights().map(|w| w * total);
        GroupSizes { e, r, p }
    }

    /// Integer sizes summing to `total`, by largest-remainder apportionment.
    /// Ties in the remainder go to the earlier arm in E, R, P order.
    pub fn realize(total: u64, alloc: &AllocationRatio) -> Self {
        let [e, r, p] = apportion(total, alloc);
        GroupSizes {
            e: e as f64,
            r: r as f64,
            p: p as f64,
        }
    }

    pub fn total(&self) -> f64 {
        self.e + self.r + self.p
    }

    pub fn get(&self, arm: Arm) -> f64 {
        match arm {
            Arm::E => self.e,
            Arm::R => self.r,
            Arm::P => self.p,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.e, self.r, self.p]
    }

    fn check_positive(&self) -> Result<()> {
        for n in self.as_array() {
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::domain(format!("group size {n} must be positive and finite")));
            }
        }
        Ok(())
    }
}

/// Largest-remainder split of `total` over the allocation parts.
pub fn apportion(total: u64, alloc: &AllocationRatio) -> [u64; 3] {
    let parts = alloc.parts();
    let s = alloc.block_size();
    let mut out = parts.map(|r| (total as u128 * r as u128 / s as u128) as u64);
    let rem = parts.map(|r| (total as u128 * r as u128 % s as u128) as u64);
    let mut left = total - out.iter().sum::<u64>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| rem[b].cmp(&rem[a]).then(a.cmp(&b)));
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[k] += 1;
        left -= 1;
    }
    out
}

/// How the critical value `t_{α,ν}` in the power approximation is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Critical {
    /// Standard normal α-quantile. Power then depends on `n` and `σ` only through `n/σ²`.
    #[default]
    Normal,
    /// Student-t α-quantile with `ν_ij = n_i + n_j − 2` degrees of freedom.
    StudentT,
}

/// Totals over which the sample size search runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SizeGrid {
    /// Multiples of the allocation block, so every group size is an integer.
    #[default]
    WholeBlocks,
    /// Every integer total, with real-valued group sizes `w_k · n` in the power evaluation.
    AnyTotal,
}

/// Everything the power approximation and the sample size search need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    /// Non-inferiority margin, `> 0`.
    pub delta_er: f64,
    /// Superiority margin of E over P, `≥ 0`.
    pub delta_ep: f64,
    /// Superiority margin of R over P, `≥ 0`.
    pub delta_rp: f64,
    pub mu_e: f64,
    pub mu_r: f64,
    pub mu_p: f64,
    pub sigma: f64,
    pub alloc: AllocationRatio,
    /// One-sided level of each local test.
    pub alpha: f64,
    pub target_power: f64,
    pub critical: Critical,
    pub grid: SizeGrid,
}

/// Builder for [`DesignSpec`]. Unset fields default to `α = 0.025`, power 0.8,
/// `σ = 1`, balanced allocation, zero superiority margins and zero means.
#[derive(Debug, Clone)]
pub struct DesignSpecBuilder {
    spec: DesignSpec,
}

impl DesignSpecBuilder {
    pub fn margins(mut self, delta_er: f64, delta_ep: f64, delta_rp: f64) -> Self {
        self.spec.delta_er = delta_er;
        self.spec.delta_ep = delta_ep;
        self.spec.delta_rp = delta_rp;
        self
    }

    pub fn means(mut self, mu_e: f64, mu_r: f64, mu_p: f64) -> Self {
        self.spec.mu_e = mu_e;
        self.spec.mu_r = mu_r;
        self.spec.mu_p = mu_p;
        self
    }

    pub fn sigma(mut self, sigma: f64) -> Self {
        self.spec.sigma = sigma;
        self
    }

    pub fn alloc(mut self, alloc: AllocationRatio) -> Self {
        self.spec.alloc = alloc;
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.spec.alpha = alpha;
        self
    }

    pub fn target_power(mut self, power: f64) -> Self {
        self.spec.target_power = power;
        self
    }

    pub fn critical(mut self, critical: Critical) -> Self {
        self.spec.critical = critical;
        self
    }

    pub fn grid(mut self, grid: SizeGrid) -> Self {
        self.spec.grid = grid;
        self
    }

    pub fn build(self) -> Result<DesignSpec> {
        self.spec.validate()?;
        Ok(self.spec)
    }
}

impl DesignSpec {
    pub fn builder() -> DesignSpecBuilder {
        DesignSpecBuilder {
            spec: DesignSpec {
                delta_er: f64::NAN,
                delta_ep: 0.0,
                delta_rp: 0.0,
                mu_e: 0.0,
                mu_r: 0.0,
                mu_p: 0.0,
                sigma: 1.0,
                alloc: AllocationRatio::balanced(),
                alpha: 0.025,
                target_power: 0.8,
                critical: Critical::Normal,
                grid: SizeGrid::WholeBlocks,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.delta_er,
            self.delta_ep,
            self.delta_rp,
            self.mu_e,
            self.mu_r,
            self.mu_p,
            self.sigma,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("design parameters must be finite"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::domain("sigma must be positive"));
        }
        if !(self.delta_er > 0.0) {
            return Err(Error::domain("non-inferiority margin must be positive"));
        }
        if self.delta_ep < 0.0 || self.delta_rp < 0.0 {
            return Err(Error::domain("superiority margins must be non-negative"));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::domain("alpha must lie in (0, 0.5)"));
        }
        if !(self.target_power > 0.5 && self.target_power < 1.0) {
            return Err(Error::domain("target power must lie in (0.5, 1)"));
        }
        Ok(())
    }

    /// Copy with a different outcome standard deviation.
    pub fn with_sigma(&self, sigma: f64) -> Self {
        DesignSpec { sigma, ..*self }
    }

    /// Copy with the outcome variance set to `variance`.
    pub fn with_variance(&self, variance: f64) -> Self {
        self.with_sigma(variance.sqrt())
    }

    /// Whether the planning alternative lies strictly inside H1.
    pub fn alternative_in_h1(&self) -> bool {
        self.mu_e - self.mu_r < self.delta_er
            && self.mu_p - self.mu_e > self.delta_ep
            && self.mu_p - self.mu_r > self.delta_rp
    }

    fn check_h1(&self) -> Result<()> {
        if self.alternative_in_h1() {
            return Ok(());
        }
        Err(Error::InfiniteSampleSize(format!(
            "need mu_E - mu_R < {}, mu_P - mu_E > {}, mu_P - mu_R > {}; got {}, {}, {}",
            self.delta_er,
            self.delta_ep,
            self.delta_rp,
            self.mu_e - self.mu_r,
            self.mu_p - self.mu_e,
            self.mu_p - self.mu_r
        )))
    }

    /// Spacing of admissible totals.
    pub fn grid_step(&self) -> u64 {
        match self.grid {
            SizeGrid::WholeBlocks => self.alloc.block_size(),
            SizeGrid::AnyTotal => 1,
        }
    }

    /// Smallest admissible total: every group gets at least two subjects.
    pub fn min_total(&self) -> u64 {
        let step = self.grid_step();
        let parts = self.alloc.parts();
        let s = self.alloc.block_size();
        let mut n = step;
        loop {
            let ok = match self.grid {
                SizeGrid::WholeBlocks => parts.iter().all(|r| r * (n / s) >= 2),
                SizeGrid::AnyTotal => {
                    apportion(n, &self.alloc).iter().all(|&k| k >= 2)
                        && parts.iter().all(|&r| (r * n) as f64 / s as f64 >= 2.0)
                }
            };
            if ok {
                return n;
            }
            n += step;
        }
    }

    /// Smallest admissible total that is `>= n`.
    pub fn grid_ceil(&self, n: f64) -> u64 {
        let step = self.grid_step();
        let min = self.min_total();
        if !(n > min as f64) {
            return min;
        }
        let k = (n / step as f64).ceil() as u64;
        (k * step).max(min)
    }
}

/// Off-diagonal correlations of the three test statistics, ordered (ER, RP, EP).
/// Depends on the sizes only through their ratios.
pub fn covariance_matrix(sizes: &GroupSizes) -> Result<Corr3> {
    sizes.check_positive()?;
    let GroupSizes { e, r, p } = *sizes;
    let r12 = -1.0 / ((1.0 + r / e) * (1.0 + r / p)).sqrt();
    let r13 = 1.0 / ((1.0 + e / r) * (1.0 + e / p)).sqrt();
    let r23 = 1.0 / ((1.0 + p / r) * (1.0 + p / e)).sqrt();
    Corr3::new(r12, r13, r23)
}

/// Upper limits `[ER, RP, EP]` of the trivariate normal probability.
fn power_limits(spec: &DesignSpec, sizes: &GroupSizes) -> Result<[f64; 3]> {
    let GroupSizes { e, r, p } = *sizes;
    let nu = [e + r - 2.0, r + p - 2.0, e + p - 2.0];
    if nu.iter().any(|v| *v < 1.0) {
        return Err(Error::domain(format!(
            "degrees of freedom {nu:?} below 1; each pair needs more subjects"
        )));
    }
    let crit = match spec.critical {
        Critical::Normal => [norm_quantile(spec.alpha); 3],
        Critical::StudentT => [
            t_quantile(spec.alpha, nu[0])?,
            t_quantile(spec.alpha, nu[1])?,
            t_quantile(spec.alpha, nu[2])?,
        ],
    };
    let se = |a: f64, b: f64| spec.sigma * (1.0 / a + 1.0 / b).sqrt();
    let d_er = spec.mu_e - spec.mu_r;
    let d_rp = spec.mu_r - spec.mu_p;
    let d_ep = spec.mu_e - spec.mu_p;
    Ok([
        crit[0] - (d_er - spec.delta_er) / se(e, r),
        crit[1] - (d_rp + spec.delta_rp) / se(r, p),
        crit[2] - (d_ep + spec.delta_ep) / se(e, p),
    ])
}

/// Approximate power of the global test with the given group sizes.
pub fn power(spec: &DesignSpec, sizes: &GroupSizes) -> Result<f64> {
    spec.validate()?;
    let corr = covariance_matrix(sizes)?;
    let u = power_limits(spec, sizes)?;
    mvn3_cdf(u, &corr)
}

/// Power with the total `n` split as `w_k · n`.
pub fn power_at_total(spec: &DesignSpec, total: f64) -> Result<f64> {
    power(spec, &GroupSizes::from_total(total, &spec.alloc))
}

/// Result of the sample size search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    pub total: u64,
    /// Integer group sizes for `total`.
    pub sizes: GroupSizes,
    /// Power at `total`.
    pub power: f64,
}

// Beyond this the search gives up rather than loop forever near the H1 boundary.
const MAX_TOTAL: u64 = 1 << 40;

/// Smallest admissible total whose power reaches the target.
///
/// Totals are drawn from the spec's [`SizeGrid`]. The search doubles from the
/// smallest admissible total until the target is reached, then bisects.
pub fn required_sample_size(spec: &DesignSpec) -> Result<SampleSize> {
    spec.validate()?;
    spec.check_h1()?;
    let step = spec.grid_step();
    let b = |k: u64| power_at_total(spec, (k * step) as f64);
    let mut lo = spec.min_total() / step;
    let first = b(lo)?;
    if first >= spec.target_power {
        return Ok(finish(spec, lo * step, first));
    }
    let mut hi = lo * 2;
    let mut at_hi = b(hi)?;
    while at_hi < spec.target_power {
        lo = hi;
        hi *= 2;
        if hi * step > MAX_TOTAL {
            return Err(Error::InfiniteSampleSize(format!(
                "power {at_hi} still below target at n = {}",
                lo * step
            )));
        }
        at_hi = b(hi)?;
    }
    // b(lo) < target <= b(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let v = b(mid)?;
        if v >= spec.target_power {
            hi = mid;
            at_hi = v;
        } else {
            lo = mid;
        }
    }
    Ok(finish(spec, hi * step, at_hi))
}

fn finish(spec: &DesignSpec, total: u64, power: f64) -> SampleSize {
    SampleSize {
        total,
        sizes: GroupSizes::realize(total, &spec.alloc),
        power,
    }
}

/// The sample size as a function of the outcome variance, `x ↦ n(x)`, with the
/// rest of the design held fixed.
///
/// Under [`Critical::Normal`] the power depends on `(n, σ²)` only through
/// `n/σ²`, so one root solve gives every value: `n(x)` is the smallest
/// admissible total at or above `u*·x`. Under [`Critical::StudentT`] each
/// evaluation runs the full search.
#[derive(Debug, Clone)]
pub struct SizeCurve {
    spec: DesignSpec,
    unit_threshold: Option<f64>,
}

impl SizeCurve {
    pub fn new(spec: &DesignSpec) -> Result<Self> {
        spec.validate()?;
        spec.check_h1()?;
        let unit_threshold = match spec.critical {
            Critical::Normal => Some(unit_threshold(&spec.with_sigma(1.0))?),
            Critical::StudentT => None,
        };
        Ok(SizeCurve {
            spec: *spec,
            unit_threshold,
        })
    }

    pub fn spec(&self) -> &DesignSpec {
        &self.spec
    }

    /// `n(x)`, the required total when the outcome variance is `variance`.
    pub fn size_at(&self, variance: f64) -> Result<u64> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::domain(format!(
                "variance {variance} must be positive and finite"
            )));
        }
        match self.unit_threshold {
            Some(u) => Ok(self.spec.grid_ceil(u * variance)),
            None => Ok(required_sample_size(&self.spec.with_variance(variance))?.total),
        }
    }

    /// Variances in `(lo, hi)` at which `n(x)` jumps, ascending. `n(x)` is
    /// constant on each interval `(x_j, x_{j+1}]` between consecutive points.
    pub fn jump_points(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        if !(hi > lo && lo > 0.0) {
            return Ok(Vec::new());
        }
        let step = self.spec.grid_step();
        let n_lo = self.size_at(lo)?;
        let n_hi = self.size_at(hi)?;
        let mut out = Vec::new();
        let mut n = n_lo;
        while n < n_hi {
            // n(x) = n exactly on (x_prev, x_n]; x_n is where n stops sufficing.
            let x = self.last_variance_for(n, lo, hi)?;
            if x > lo && x < hi {
                out.push(x);
            }
            n += step;
        }
        Ok(out)
    }

    /// `n(x)` on `[lo, hi]` as a step table, so that repeated lookups cost a
    /// binary search instead of a sample-size search.
    pub fn steps(&self, lo: f64, hi: f64) -> Result<SizeSteps> {
        Ok(SizeSteps {
            first: self.size_at(lo)?,
            step: self.spec.grid_step(),
            breaks: self.jump_points(lo, hi)?,
        })
    }

    // Largest variance at which total n still reaches the target power.
    fn last_variance_for(&self, n: u64, lo: f64, hi: f64) -> Result<f64> {
        match self.unit_threshold {
            Some(u) => Ok(n as f64 / u),
            None => {
                let target = self.spec.target_power;
                let g = |x: f64| power_at_total(&self.spec.with_variance(x), n as f64).unwrap_or(f64::NAN) - target;
                find_root(g, lo, hi, 1e-12 * hi)
            }
        }
    }
}

/// [`SizeCurve`] restricted to an interval: `first` at its lower end, then one
/// grid step up at each break.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeSteps {
    pub first: u64,
    pub step: u64,
    pub breaks: Vec<f64>,
}

impl SizeSteps {
    /// `n(x)` for `x` inside the tabulated interval.
    pub fn size_at(&self, x: f64) -> u64 {
        self.first + self.step * self.breaks.partition_point(|&b| b < x) as u64
    }
}

// u* with power(total = u, σ = 1) = target, for the normal-quantile convention.
fn unit_threshold(spec: &DesignSpec) -> Result<f64> {
    let target = spec.target_power;
    // Totals too small for a positive pairwise df count as failing.
    let g = |u: f64| match power_at_total(spec, u) {
        Ok(p) => p - target,
        Err(_) => -1.0,
    };
    let mut lo = spec.min_total() as f64;
    let mut hi = lo;
    if g(lo) >= 0.0 {
        while g(lo) >= 0.0 {
            hi = lo;
            lo /= 2.0;
        }
    } else {
        while g(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > MAX_TOTAL as f64 {
                return Err(Error::InfiniteSampleSize("power never reaches the target".into()));
            }
        }
    }
    find_root(g, lo, hi, 1e-13)
}
