//! Run configuration: a TOML file with `[design]`, `[simulation]` and `[grid]`
//! sections, overridden field by field by command-line flags.

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use goldssr::design::{AllocationRatio, Critical, DesignSpec, SizeGrid};
use goldssr::estimators::Estimator;
use goldssr::presets;
use goldssr::simulate::Null;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub design: DesignConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub grid: GridConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid configuration {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// `load` when a path is given, the empty configuration otherwise.
    pub fn load_opt(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Config::default()), Config::load)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CriticalChoice {
    /// Normal quantile.
    #[default]
    Z,
    /// Student-t quantile with pairwise degrees of freedom.
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GridChoice {
    /// Totals in whole allocation blocks.
    #[default]
    Blocks,
    /// Every integer total.
    Any,
}

/// `[design]` section. Missing fields fall back to the published power design.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub delta_er: Option<f64>,
    pub delta_ep: Option<f64>,
    pub delta_rp: Option<f64>,
    pub mu_e: Option<f64>,
    pub mu_r: Option<f64>,
    pub mu_p: Option<f64>,
    pub sigma: Option<f64>,
    pub alloc: Option<String>,
    pub alpha: Option<f64>,
    pub target_power: Option<f64>,
    pub critical: Option<CriticalChoice>,
    pub grid: Option<GridChoice>,
}

/// Design flags shared by the analytic commands.
#[derive(Debug, Clone, Default, Args)]
pub struct DesignArgs {
    /// Non-inferiority margin of E versus R [default: 0.3]
    #[arg(long)]
    pub delta_er: Option<f64>,
    /// Superiority margin of E over P [default: 0]
    #[arg(long)]
    pub delta_ep: Option<f64>,
    /// Superiority margin of R over P [default: 0]
    #[arg(long)]
    pub delta_rp: Option<f64>,
    /// Mean of the experimental arm under the alternative [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub mu_e: Option<f64>,
    /// Mean of the reference arm under the alternative [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub mu_r: Option<f64>,
    /// Mean of the placebo arm under the alternative [default: 0.6]
    #[arg(long, allow_negative_numbers = true)]
    pub mu_p: Option<f64>,
    /// Common standard deviation [default: 1]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Allocation ratio E:R:P [default: 1:1:1]
    #[arg(long)]
    pub alloc: Option<String>,
    /// One-sided level of each local test [default: 0.025]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Target power of the global test [default: 0.8]
    #[arg(long)]
    pub target_power: Option<f64>,
    /// Critical value of the local tests [default: z]
    #[arg(long, value_enum)]
    pub critical: Option<CriticalChoice>,
    /// Admissible totals [default: blocks]
    #[arg(long, value_enum)]
    pub grid: Option<GridChoice>,
}

impl DesignArgs {
    /// Flags over the config section over the defaults.
    pub fn resolve(&self, cfg: &DesignConfig) -> Result<DesignSpec> {
        let f = |flag: Option<f64>, file: Option<f64>, default: f64| flag.or(file).unwrap_or(default);
        let alloc: AllocationRatio = match self.alloc.as_ref().or(cfg.alloc.as_ref()) {
            Some(s) => s.parse()?,
            None => AllocationRatio::balanced(),
        };
        let critical = match self.critical.or(cfg.critical).unwrap_or_default() {
            CriticalChoice::Z => Critical::Normal,
            CriticalChoice::T => Critical::StudentT,
        };
        let grid = match self.grid.or(cfg.grid).unwrap_or_default() {
            GridChoice::Blocks => SizeGrid::WholeBlocks,
            GridChoice::Any => SizeGrid::AnyTotal,
        };
        let spec = DesignSpec::builder()
            .margins(
                f(self.delta_er, cfg.delta_er, presets::DELTA_ER),
                f(self.delta_ep, cfg.delta_ep, 0.0),
                f(self.delta_rp, cfg.delta_rp, 0.0),
            )
            .means(
                f(self.mu_e, cfg.mu_e, 0.0),
                f(self.mu_r, cfg.mu_r, 0.0),
                f(self.mu_p, cfg.mu_p, presets::MU_P[0]),
            )
            .sigma(f(self.sigma, cfg.sigma, 1.0))
            .alloc(alloc)
            .alpha(f(self.alpha, cfg.alpha, presets::ALPHA))
            .target_power(f(self.target_power, cfg.target_power, presets::TARGET_POWER))
            .critical(critical)
            .grid(grid)
            .build()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    /// Truth at the planning alternative.
    #[default]
    Power,
    /// Truth on a null boundary.
    T1e,
    /// Fixed design at its required size, no pilot.
    Fixed,
}

/// A number, or `"optimal"` for the inflation factor that meets the target power.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ZetaSetting {
    Value(f64),
    Named(String),
}

/// `[simulation]` section.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub kind: Option<RunKind>,
    pub reps: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub zeta: Option<ZetaSetting>,
    /// Targeted nulls of a type I error run.
    pub nulls: Option<Vec<String>>,
    /// When false the final size never drops below the fixed-design size.
    pub allow_downsizing: Option<bool>,
}

impl SimulationConfig {
    /// Nulls to simulate, one run per boundary: EP and RP share theirs.
    pub fn null_runs(&self) -> Result<Vec<Null>> {
        let names = self.nulls.clone().unwrap_or_else(|| vec!["ER".into(), "EP".into()]);
        let mut out = Vec::new();
        for n in names {
            let null = match n.parse::<Null>()? {
                Null::RP => Null::EP,
                other => other,
            };
            if !out.contains(&null) {
                out.push(null);
            }
        }
        Ok(out)
    }

    /// `None` means the optimal factor.
    pub fn fixed_zeta(&self) -> Result<Option<f64>> {
        match &self.zeta {
            None => Ok(Some(1.0)),
            Some(ZetaSetting::Value(z)) => Ok(Some(*z)),
            Some(ZetaSetting::Named(s)) if s == "optimal" => Ok(None),
            Some(ZetaSetting::Named(s)) => bail!("simulation.zeta = {s:?}: expected a number or \"optimal\""),
        }
    }
}

/// `[grid]` section: each list replaces the matching design field and the
/// scenarios are the cartesian product. An empty list yields no scenarios.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub delta_er: Option<Vec<f64>>,
    pub mu_p: Option<Vec<f64>>,
    pub alloc: Option<Vec<String>>,
    pub sigma: Option<Vec<f64>>,
    pub method: Option<Vec<String>>,
    pub n1: Option<Vec<u64>>,
}

impl GridConfig {
    pub fn is_empty(&self) -> bool {
        self.delta_er.is_none()
            && self.mu_p.is_none()
            && self.alloc.is_none()
            && self.sigma.is_none()
            && self.method.is_none()
            && self.n1.is_none()
    }

    /// Designs in the order margin, placebo mean, allocation, standard deviation.
    pub fn designs(&self, base: &DesignSpec) -> Result<Vec<DesignSpec>> {
        let deltas = self.delta_er.clone().unwrap_or_else(|| vec![base.delta_er]);
        let mus = self.mu_p.clone().unwrap_or_else(|| vec![base.mu_p]);
        let allocs: Vec<AllocationRatio> = match &self.alloc {
            Some(v) => v.iter().map(|a| a.parse()).collect::<goldssr::Result<_>>()?,
            None => vec![base.alloc],
        };
        let sigmas = self.sigma.clone().unwrap_or_else(|| vec![base.sigma]);
        let mut out = Vec::new();
        for &d in &deltas {
            for &mu in &mus {
                for &a in &allocs {
                    for &s in &sigmas {
                        let spec = DesignSpec {
                            delta_er: d,
                            mu_p: mu,
                            alloc: a,
                            sigma: s,
                            ..*base
                        };
                        spec.validate()?;
                        out.push(spec);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn methods(&self) -> Result<Vec<Estimator>> {
        match &self.method {
            Some(v) => Ok(v.iter().map(|m| m.parse()).collect::<goldssr::Result<_>>()?),
            None => Ok(vec![Estimator::XingGanju]),
        }
    }

    pub fn pilots(&self, default: &[u64]) -> Vec<u64> {
        self.n1.clone().unwrap_or_else(|| default.to_vec())
    }
}
