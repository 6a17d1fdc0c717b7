//! Monte Carlo engine for adaptive and fixed trials.
//!
//! Every replication owns its random stream: a ChaCha8 generator seeded from
//! the master seed and the scenario id, with the replication index as stream
//! number. Replications therefore run in any order on any number of threads,
//! and a report is bit-identical to a serial run.

mod report;
mod scenario;
mod trial;

pub use report::{quantile_type7, write_csv, CsvRow, SimulationReport, CSV_HEADER};
pub use scenario::{Null, ScenarioConfig, Sizing};
pub use trial::{generate_trial, iut_test, IutResult};

use crate::design::{apportion, DesignSpec, SizeCurve};
use crate::error::{Error, Result};
use crate::estimators::estimate;
use crate::reestimate::final_sample_size;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use trial::generate_blocks;

// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The generator of replication `index` of a scenario:
/// `ChaCha8Rng::seed_from_u64(splitmix(master ^ fnv1a(id)))` on stream `index`.
pub fn replication_rng(master_seed: u64, scenario_id: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(master_seed ^ fnv1a(scenario_id.as_bytes())));
    rng.set_stream(index);
    rng
}

/// What one replication produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub n_final: u64,
    /// Re-estimated size before the pilot floor and inflation; `None` for fixed designs.
    pub n_reest: Option<u64>,
    /// Variance estimate before flooring; `None` for fixed designs.
    pub estimate: Option<f64>,
    pub test: IutResult,
}

/// Runs the replications of one scenario.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: ScenarioConfig,
    curve: Option<SizeCurve>,
}

impl Simulator {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let curve = match config.sizing {
            Sizing::Reestimate(_) => Some(SizeCurve::new(&config.spec)?),
            Sizing::Fixed(_) => None,
        };
        Ok(Simulator { config, curve })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// One replication, fully determined by (seed, scenario id, index).
    pub fn run_trial(&self, index: u64) -> Result<TrialOutcome> {
        let c = &self.config;
        let spec: &DesignSpec = &c.spec;
        let mut rng = replication_rng(c.seed, &c.id, index);
        let composition = spec.alloc.parts();
        match c.sizing {
            Sizing::Fixed(n) => {
                let data = generate_blocks(c.truth, spec.sigma, apportion(n, &spec.alloc), composition, 0, &mut rng)?;
                Ok(TrialOutcome {
                    n_final: n,
                    n_reest: None,
                    estimate: None,
                    test: iut_test(&data, spec)?,
                })
            }
            Sizing::Reestimate(policy) => {
                let pilot_sizes = policy.pilot_sizes(&spec.alloc);
                let pilot = generate_blocks(c.truth, spec.sigma, pilot_sizes, composition, 0, &mut rng)?;
                let seen = if policy.method.is_blinded() {
                    pilot.blinded()
                } else {
                    pilot.clone()
                };
                let est = estimate(
                    policy.method,
                    &seen,
                    [spec.mu_e, spec.mu_r, spec.mu_p],
                    policy.pilot_weights(&spec.alloc),
                )?;
                let curve = self.curve.as_ref().expect("curve built for re-estimation");
                let n_reest = curve.size_at(est.value)?;
                let n_final = final_sample_size(&policy, n_reest);
                let extra = apportion(n_final - policy.n1, &spec.alloc);
                let first_block = pilot.blocks().map_or(0, |b| b.iter().max().map_or(0, |m| m + 1));
                let stage2 = generate_blocks(c.truth, spec.sigma, extra, composition, first_block, &mut rng)?;
                let all = concat(&pilot, &stage2)?;
                Ok(TrialOutcome {
                    n_final,
                    n_reest: Some(n_reest),
                    estimate: Some(est.meta.raw),
                    test: iut_test(&all, spec)?,
                })
            }
        }
    }

    /// All replications on `workers` threads (0 for the rayon default),
    /// aggregated in replication order.
    pub fn run(&self, workers: usize) -> Result<SimulationReport> {
        let reps = self.config.reps;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))?;
        let outcomes: Vec<TrialOutcome> = pool.install(|| {
            (0..reps)
                .into_par_iter()
                .map(|i| self.run_trial(i))
                .collect::<Result<_>>()
        })?;
        Ok(SimulationReport::from_outcomes(&self.config, &outcomes))
    }
}

fn concat(a: &crate::estimators::TrialData, b: &crate::estimators::TrialData) -> Result<crate::estimators::TrialData> {
    let mut y = a.outcomes().to_vec();
    y.extend_from_slice(b.outcomes());
    let mut l = a.labels().unwrap_or_default().to_vec();
    l.extend_from_slice(b.labels().unwrap_or_default());
    let mut k = a.blocks().unwrap_or_default().to_vec();
    k.extend_from_slice(b.blocks().unwrap_or_default());
    crate::estimators::TrialData::new(y, Some(l), Some(k))
}

/// One adaptive (or fixed) trial of `config`.
pub fn run_adaptive_trial(config: &ScenarioConfig, index: u64) -> Result<TrialOutcome> {
    Simulator::new(config.clone())?.run_trial(index)
}

/// Rejection rates with the truth at the planning alternative.
pub fn simulate_power(config: &ScenarioConfig, workers: usize) -> Result<SimulationReport> {
    if config.null.is_some() {
        return Err(Error::domain(
            "power runs need the truth at the planning alternative, not a null",
        ));
    }
    Simulator::new(config.clone())?.run(workers)
}

/// Local rejection rate with the truth on the boundary of `config.null`.
pub fn simulate_type1(config: &ScenarioConfig, workers: usize) -> Result<SimulationReport> {
    if config.null.is_none() {
        return Err(Error::domain("type I error runs need a null hypothesis to target"));
    }
    Simulator::new(config.clone())?.run(workers)
}

/// Distribution of the final sample size. Same run as [`simulate_power`],
/// read for its size quantiles.
pub fn sample_size_distribution(config: &ScenarioConfig, workers: usize) -> Result<SimulationReport> {
    Simulator::new(config.clone())?.run(workers)
}
