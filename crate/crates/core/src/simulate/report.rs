use super::scenario::{Null, ScenarioConfig, Sizing};
use super::TrialOutcome;
use crate::error::Result;
use serde::Serialize;
use std::io::Write;

/// Sample quantile by linear interpolation between order statistics
/// (Hyndman and Fan type 7). `sorted` must be ascending and non-empty.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mc_error(p: f64, reps: u64) -> f64 {
    (p * (1.0 - p) / reps as f64).sqrt()
}

/// Aggregated results of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub scenario_id: String,
    pub method: String,
    pub mu_p: f64,
    pub alloc: String,
    pub n1: Option<u64>,
    pub zeta: Option<f64>,
    pub reps: u64,
    pub seed: u64,
    pub null: Option<Null>,
    /// Rejection counts, ordered ER, EP, RP, global.
    pub rejections: [u64; 4],
    /// Rejection rates, ordered ER, EP, RP, global.
    pub rates: [f64; 4],
    /// `√(p(1−p)/reps)` for each rate.
    pub mc_errors: [f64; 4],
    pub n_final_mean: f64,
    pub n_final_median: f64,
    pub n_final_q1: f64,
    pub n_final_q3: f64,
    /// Mean of the unfloored variance estimates, for re-estimation runs.
    pub mean_estimate: Option<f64>,
}

impl SimulationReport {
    pub(crate) fn from_outcomes(config: &ScenarioConfig, outcomes: &[TrialOutcome]) -> Self {
        let reps = outcomes.len() as u64;
        let mut rejections = [0u64; 4];
        for o in outcomes {
            let t = &o.test;
            for (slot, hit) in rejections
                .iter_mut()
                .zip([t.reject_er, t.reject_ep, t.reject_rp, t.reject_global])
            {
                *slot += hit as u64;
            }
        }
        let rates = rejections.map(|c| c as f64 / reps as f64);
        let mut sizes: Vec<f64> = outcomes.iter().map(|o| o.n_final as f64).collect();
        sizes.sort_by(|a, b| a.partial_cmp(b).expect("finite sizes"));
        let estimates: Vec<f64> = outcomes.iter().filter_map(|o| o.estimate).collect();
        let (n1, zeta) = match config.sizing {
            Sizing::Fixed(_) => (None, None),
            Sizing::Reestimate(p) => (Some(p.n1), Some(p.zeta)),
        };
        SimulationReport {
            scenario_id: config.id.clone(),
            method: config.method_label(),
            mu_p: config.spec.mu_p,
            alloc: config.spec.alloc.to_string(),
            n1,
            zeta,
            reps,
            seed: config.seed,
            null: config.null,
            rejections,
            rates,
            mc_errors: rates.map(|p| mc_error(p, reps)),
            n_final_mean: sizes.iter().sum::<f64>() / reps as f64,
            n_final_median: quantile_type7(&sizes, 0.5),
            n_final_q1: quantile_type7(&sizes, 0.25),
            n_final_q3: quantile_type7(&sizes, 0.75),
            mean_estimate: (!estimates.is_empty()).then(|| estimates.iter().sum::<f64>() / estimates.len() as f64),
        }
    }

    pub fn power_global(&self) -> f64 {
        self.rates[3]
    }

    /// Rejection rate of a local null.
    pub fn rate(&self, null: Null) -> f64 {
        self.rates[null.index()]
    }

    /// CSV rows: one for a power run; for a type I error run one per local
    /// null whose boundary the truth lies on (ER alone, or both EP and RP).
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        let targets: Vec<Option<Null>> = match self.null {
            None => vec![None],
            Some(Null::ER) => vec![Some(Null::ER)],
            Some(_) => vec![Some(Null::EP), Some(Null::RP)],
        };
        targets
            .into_iter()
            .map(|t| {
                let k = t.map_or(3, Null::index);
                CsvRow {
                    scenario_id: self.scenario_id.clone(),
                    method: self.method.clone(),
                    mu_p: self.mu_p,
                    alloc: self.alloc.clone(),
                    n1: self.n1,
                    zeta: self.zeta,
                    reps: self.reps,
                    seed: self.seed,
                    power_global: self.rates[k],
                    mc_err: self.mc_errors[k],
                    t1e_target: t.map(|n| n.to_string()),
                    n_final_median: self.n_final_median,
                    n_final_q1: self.n_final_q1,
                    n_final_q3: self.n_final_q3,
                }
            })
            .collect()
    }
}

/// Column order of simulation CSV files.
pub const CSV_HEADER: [&str; 14] = [
    "scenario_id",
    "method",
    "mu_P",
    "alloc",
    "n1",
    "zeta",
    "reps",
    "seed",
    "power_global",
    "mc_err",
    "t1e_target",
    "n_final_median",
    "n_final_q1",
    "n_final_q3",
];

/// One line of a simulation CSV. For type I error rows `power_global` holds
/// the rejection rate of the local null named in `t1e_target`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub scenario_id: String,
    pub method: String,
    pub mu_p: f64,
    pub alloc: String,
    pub n1: Option<u64>,
    pub zeta: Option<f64>,
    pub reps: u64,
    pub seed: u64,
    pub power_global: f64,
    pub mc_err: f64,
    pub t1e_target: Option<String>,
    pub n_final_median: f64,
    pub n_final_q1: f64,
    pub n_final_q3: f64,
}

/// Write the header and one or more rows per report. An empty slice yields
/// the header alone.
pub fn write_csv<W: Write>(out: W, reports: &[SimulationReport]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        for row in r.csv_rows() {
            w.serialize(row)?;
        }
    }
    w.flush()?;
    Ok(())
}
