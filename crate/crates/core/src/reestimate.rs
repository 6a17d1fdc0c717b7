//! Blinded sample size re-estimation, the expected power of the adaptive
//! design and the inflation factor `ζ` for the block-sum estimator.
//!
//! After the pilot of `n1` subjects the variance estimate `x` is plugged into
//! the sample size search, giving `n(x)`. The final size is
//! `max(n1, ⌈ζ · n(x)⌉)`, with no upper cap. Its power, averaged over the law
//! `f` of the estimator, is approximated by
//!
//! ```text
//! ∫ B(max(n1, ⌈ζ · n(x)⌉)) f(x) dx
//! ```
//!
//! where `B` is the fixed-design power at the true `σ`. This ignores the
//! dependence between the pilot estimate and the final test statistic.

use crate::design::{
    apportion, power_at_total, required_sample_size, AllocationRatio, DesignSpec, SizeCurve, SizeSteps,
};
use crate::error::{Error, Result};
use crate::estimators::{density_os, density_xg, Estimator, EstimatorDensity, VarianceEstimate};
use crate::statcore::{find_root_expanding, integrate_piecewise, Integral, TailPolicy};
use serde::Serialize;
use std::cell::RefCell;
use std::collections::HashMap;

/// How the pilot is used to size the trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReestimationPolicy {
    pub method: Estimator,
    /// Pilot size.
    pub n1: u64,
    /// Randomization block size; the block-sum estimator needs `m | n1`.
    pub block_size: u64,
    /// Multiplier on the re-estimated size, `1.0` for none.
    pub zeta: f64,
    /// When false the final size never drops below `planned_total`.
    pub allow_downsizing: bool,
    /// Initially planned total, only read when downsizing is not allowed.
    pub planned_total: u64,
}

impl ReestimationPolicy {
    /// Downsizing allowed, no inflation, one block per allocation cycle.
    pub fn new(method: Estimator, n1: u64, alloc: &AllocationRatio) -> Self {
        ReestimationPolicy {
            method,
            n1,
            block_size: alloc.block_size(),
            zeta: 1.0,
            allow_downsizing: true,
            planned_total: 0,
        }
    }

    pub fn with_zeta(self, zeta: f64) -> Self {
        ReestimationPolicy { zeta, ..self }
    }

    pub fn validate(&self, alloc: &AllocationRatio) -> Result<()> {
        if self.n1 < 6 {
            return Err(Error::domain(format!("pilot size {} below 6", self.n1)));
        }
        if let Some(k) = self.pilot_sizes(alloc).iter().position(|&c| c < 2) {
            return Err(Error::domain(format!(
                "pilot of {} leaves arm {} with fewer than 2 subjects",
                self.n1,
                ["E", "R", "P"][k]
            )));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::domain(format!(
                "inflation factor {} must be positive",
                self.zeta
            )));
        }
        if self.block_size == 0 {
            return Err(Error::domain("block size must be positive"));
        }
        if self.method == Estimator::XingGanju
            && (!self.n1.is_multiple_of(self.block_size) || self.n1 / self.block_size < 2)
        {
            return Err(Error::domain(format!(
                "pilot size {} must be a multiple of the block size {} with at least 2 blocks",
                self.n1, self.block_size
            )));
        }
        Ok(())
    }

    /// Pilot subjects per arm.
    pub fn pilot_sizes(&self, alloc: &AllocationRatio) -> [u64; 3] {
        apportion(self.n1, alloc)
    }

    pub fn pilot_weights(&self, alloc: &AllocationRatio) -> [f64; 3] {
        self.pilot_sizes(alloc).map(|c| c as f64 / self.n1 as f64)
    }
}

/// Sample size from the search with `σ²` replaced by the estimate.
pub fn reestimate_sample_size(spec: &DesignSpec, estimate: &VarianceEstimate) -> Result<u64> {
    if !(estimate.value > 0.0) {
        return Err(Error::domain("variance estimate must be positive"));
    }
    Ok(required_sample_size(&spec.with_variance(estimate.value))?.total)
}

/// `max(n1, ⌈ζ · n_reest⌉)`, and at least the planned size when downsizing is off.
pub fn final_sample_size(policy: &ReestimationPolicy, n_reest: u64) -> u64 {
    let scaled = policy.zeta * n_reest as f64;
    // A product like 1.06 · 500 must not round up past 530.
    let inflated = (scaled - 1e-9 * scaled.max(1.0)).ceil().max(0.0) as u64;
    let floor = if policy.allow_downsizing {
        policy.n1
    } else {
        policy.n1.max(policy.planned_total)
    };
    inflated.max(floor)
}

/// Sampling law of the policy's estimator when the true variance is `spec.sigma²`.
/// Only the one-sample and block-sum estimators have one.
pub fn sampling_density(spec: &DesignSpec, policy: &ReestimationPolicy) -> Result<EstimatorDensity> {
    let sigma2 = spec.sigma * spec.sigma;
    match policy.method {
        Estimator::OneSample => density_os(
            sigma2,
            policy.n1 as usize,
            [spec.mu_e, spec.mu_r, spec.mu_p],
            policy.pilot_weights(&spec.alloc),
        ),
        Estimator::XingGanju => density_xg(sigma2, policy.n1 as usize, policy.block_size as usize),
        other => Err(Error::domain(format!("no sampling density implemented for {other}"))),
    }
}

/// Fixed-design power at the true `σ`, memoized by total.
struct PowerTable {
    spec: DesignSpec,
    cache: RefCell<HashMap<u64, f64>>,
    error: RefCell<Option<Error>>,
}

impl PowerTable {
    fn new(spec: &DesignSpec) -> Self {
        PowerTable {
            spec: *spec,
            cache: RefCell::new(HashMap::new()),
            error: RefCell::new(None),
        }
    }

    fn at(&self, n: u64) -> f64 {
        if let Some(v) = self.cache.borrow().get(&n) {
            return *v;
        }
        match power_at_total(&self.spec, n as f64) {
            Ok(v) => {
                self.cache.borrow_mut().insert(n, v);
                v
            }
            Err(e) => {
                self.error.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    }

    fn take_error(&self) -> Result<()> {
        match self.error.borrow_mut().take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

fn expected_power_with(
    policy: &ReestimationPolicy,
    density: &EstimatorDensity,
    steps: &SizeSteps,
    table: &PowerTable,
    tails: &TailPolicy,
) -> Result<Integral> {
    let f = |x: f64| table.at(final_sample_size(policy, steps.size_at(x)));
    let out = integrate_piecewise(f, density, &steps.breaks, tails);
    table.take_error()?;
    let out = out?;
    Ok(Integral {
        value: out.value.clamp(0.0, 1.0),
        ..out
    })
}

// The size curve tabulated over the region the quadrature visits.
fn tabulate(spec: &DesignSpec, density: &EstimatorDensity, tails: &TailPolicy) -> Result<SizeSteps> {
    let lo = density.quantile(tails.tail_mass)?;
    let hi = density.quantile(1.0 - tails.tail_mass)?;
    SizeCurve::new(spec)?.steps(lo, hi)
}

/// Approximate power of the adaptive design: the fixed-design power at the
/// final size, averaged over `density`, the law of the variance estimate.
/// `spec.sigma` is the true standard deviation.
pub fn expected_power(spec: &DesignSpec, policy: &ReestimationPolicy, density: &EstimatorDensity) -> Result<f64> {
    Ok(expected_power_integral(spec, policy, density, &TailPolicy::default())?.value)
}

/// [`expected_power`] with explicit quadrature settings and the error estimate.
pub fn expected_power_integral(
    spec: &DesignSpec,
    policy: &ReestimationPolicy,
    density: &EstimatorDensity,
    tails: &TailPolicy,
) -> Result<Integral> {
    policy.validate(&spec.alloc)?;
    let steps = tabulate(spec, density, tails)?;
    let table = PowerTable::new(spec);
    expected_power_with(policy, density, &steps, &table, tails)
}

/// Tolerance on `expected_power(ζ*) − target` used by [`inflation_factor`].
pub const ZETA_TOLERANCE: f64 = 1e-7;

/// The `ζ*` at which the expected power of the block-sum procedure equals the
/// target power, at the true `σ` of `spec`.
///
/// The root is bracketed in `[0.5, 4]`, widened up to `[0.1, 16]` if needed.
/// Fails with [`Error::FactorUndefined`] when the pilot already reaches the
/// fixed-design size.
pub fn inflation_factor(spec: &DesignSpec, policy: &ReestimationPolicy) -> Result<f64> {
    if policy.method != Estimator::XingGanju {
        return Err(Error::domain(format!(
            "the inflation factor is defined for the XG estimator, not {}",
            policy.method
        )));
    }
    policy.validate(&spec.alloc)?;
    let n_fixed = required_sample_size(spec)?.total;
    if policy.n1 >= n_fixed {
        return Err(Error::FactorUndefined { n1: policy.n1, n_fixed });
    }
    let density = sampling_density(spec, policy)?;
    let tails = TailPolicy::default();
    let steps = tabulate(spec, &density, &tails)?;
    let table = PowerTable::new(spec);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let g = |zeta: f64| {
        let p = policy.with_zeta(zeta);
        match expected_power_with(&p, &density, &steps, &table, &tails) {
            Ok(v) => v.value - spec.target_power,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let root = find_root_expanding(g, (0.5, 4.0), (0.1, 16.0), ZETA_TOLERANCE);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    root
}

/// `ζ*(σ)` for each `σ` in `sigmas`, to check where the factor is flat in `σ`.
pub fn zeta_scan(spec: &DesignSpec, policy: &ReestimationPolicy, sigmas: &[f64]) -> Vec<(f64, Result<f64>)> {
    sigmas
        .iter()
        .map(|&s| (s, inflation_factor(&spec.with_sigma(s), policy)))
        .collect()
}
