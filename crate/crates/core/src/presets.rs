//! Published scenario grids: the power study, the fixed-design sizes and the
//! type I error study.

use crate::design::{AllocationRatio, DesignSpec};
use crate::error::Result;
use crate::estimators::Estimator;
use crate::reestimate::{inflation_factor, ReestimationPolicy};
use crate::simulate::{Null, ScenarioConfig, Sizing};

pub const ALPHA: f64 = 0.025;
pub const TARGET_POWER: f64 = 0.8;
pub const DELTA_ER: f64 = 0.3;
pub const MU_P: [f64; 2] = [0.6, 0.9];
pub const ALLOCATIONS: [&str; 2] = ["1:1:1", "3:2:1"];
/// Pilot sizes of the power study: 30, 60, ..., 390.
pub const POWER_N1: [u64; 13] = [30, 60, 90, 120, 150, 180, 210, 240, 270, 300, 330, 360, 390];
/// Pilot sizes of the type I error study: 30, 90, ..., 390.
pub const T1E_N1: [u64; 7] = [30, 90, 150, 210, 270, 330, 390];
pub const T1E_DELTA_ER: [f64; 4] = [0.2, 0.3, 0.4, 0.5];
pub const POWER_REPS: u64 = 15_000;
pub const T1E_REPS: u64 = 50_000;
/// Replications per scenario in smoke mode.
pub const SMOKE_REPS: u64 = 2_000;

pub fn allocation(label: &str) -> AllocationRatio {
    label.parse().expect("preset allocations are valid")
}

/// `α = 0.025`, power 0.8, `δ_ER = 0.3`, `δ_EP = δ_RP = 0`, `μ_E = μ_R = 0`, `σ = 1`.
pub fn power_design(mu_p: f64, alloc: AllocationRatio) -> DesignSpec {
    design(DELTA_ER, mu_p, alloc)
}

pub fn design(delta_er: f64, mu_p: f64, alloc: AllocationRatio) -> DesignSpec {
    DesignSpec::builder()
        .margins(delta_er, 0.0, 0.0)
        .means(0.0, 0.0, mu_p)
        .sigma(1.0)
        .alpha(ALPHA)
        .target_power(TARGET_POWER)
        .alloc(alloc)
        .build()
        .expect("preset designs are valid")
}

/// The four fixed designs, `(μ_P, allocation)` in published order.
pub fn fixed_designs() -> Vec<DesignSpec> {
    MU_P.iter()
        .flat_map(|&mu| ALLOCATIONS.iter().map(move |a| power_design(mu, allocation(a))))
        .collect()
}

/// Every estimator at every pilot size, `ζ = 1`.
pub fn power_scenarios(reps: u64, seed: u64) -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for spec in fixed_designs() {
        for method in Estimator::ALL {
            for n1 in POWER_N1 {
                let p = ReestimationPolicy::new(method, n1, &spec.alloc);
                out.push(ScenarioConfig::power(spec, Sizing::Reestimate(p), reps, seed));
            }
        }
    }
    out
}

/// The one-sample and block-sum procedures, whose size distributions are compared.
pub fn size_scenarios(reps: u64, seed: u64) -> Vec<ScenarioConfig> {
    power_scenarios(reps, seed)
        .into_iter()
        .filter(|c| matches!(c.sizing, Sizing::Reestimate(p) if matches!(p.method, Estimator::OneSample | Estimator::XingGanju)))
        .collect()
}

/// Block-sum procedure inflated by `ζ*`, at every pilot size below the fixed-design size.
pub fn inflated_scenarios(n1_grid: &[u64], reps: u64, seed: u64) -> Result<Vec<ScenarioConfig>> {
    let mut out = Vec::new();
    for spec in fixed_designs() {
        for &n1 in n1_grid {
            let p = ReestimationPolicy::new(Estimator::XingGanju, n1, &spec.alloc);
            let zeta = inflation_factor(&spec, &p)?;
            out.push(ScenarioConfig::power(
                spec,
                Sizing::Reestimate(p.with_zeta(zeta)),
                reps,
                seed,
            ));
        }
    }
    Ok(out)
}

/// The full type I error grid: every estimator, margin, placebo mean,
/// allocation and pilot size, at the ER boundary and at the EP/RP boundary.
pub fn t1e_scenarios(reps: u64, seed: u64) -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for null in [Null::ER, Null::EP] {
        for method in Estimator::ALL {
            for d in T1E_DELTA_ER {
                for mu in MU_P {
                    for a in ALLOCATIONS {
                        let spec = design(d, mu, allocation(a));
                        for n1 in T1E_N1 {
                            let p = ReestimationPolicy::new(method, n1, &spec.alloc);
                            out.push(ScenarioConfig::type1(spec, Sizing::Reestimate(p), null, reps, seed));
                        }
                    }
                }
            }
        }
    }
    out
}
