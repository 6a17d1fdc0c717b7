use crate::design::{Critical, DesignSpec, SizeGrid};
use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::reestimate::ReestimationPolicy;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// How the final sample size is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sizing {
    /// A fixed total, no pilot.
    Fixed(u64),
    /// Internal pilot followed by re-estimation.
    Reestimate(ReestimationPolicy),
}

/// A local null hypothesis targeted by a type I error run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Null {
    ER,
    EP,
    RP,
}

impl Null {
    /// Truth means on the boundary of this null. For ER the experimental arm
    /// sits at `μ_R + δ_ER`; for EP and RP both active arms sit at the
    /// placebo mean minus their margins, which is a boundary point of both.
    pub fn boundary(self, spec: &DesignSpec) -> [f64; 3] {
        match self {
            Null::ER => [spec.mu_r + spec.delta_er, spec.mu_r, spec.mu_p],
            Null::EP | Null::RP => [spec.mu_p - spec.delta_ep, spec.mu_p - spec.delta_rp, spec.mu_p],
        }
    }

    pub fn index(self) -> usize {
        match self {
            Null::ER => 0,
            Null::EP => 1,
            Null::RP => 2,
        }
    }
}

impl fmt::Display for Null {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Null::ER => "ER",
            Null::EP => "EP",
            Null::RP => "RP",
        })
    }
}

impl FromStr for Null {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ER" => Ok(Null::ER),
            "EP" => Ok(Null::EP),
            "RP" => Ok(Null::RP),
            _ => Err(Error::domain(format!(
                "unknown null hypothesis {s:?}, expected ER, EP or RP"
            ))),
        }
    }
}

/// One simulated scenario.
///
/// The id is derived from every other input except the replication count and
/// seed, and [`ScenarioConfig::from_id`] inverts it, so a CSV row is enough to
/// re-run its scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub id: String,
    /// Planning design. `spec.sigma` is also the true standard deviation.
    pub spec: DesignSpec,
    pub sizing: Sizing,
    /// Means used to generate data.
    pub truth: [f64; 3],
    /// Targeted null for type I error runs; `None` for power runs.
    pub null: Option<Null>,
    pub reps: u64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Truth at the planning alternative.
    pub fn power(spec: DesignSpec, sizing: Sizing, reps: u64, seed: u64) -> Self {
        let truth = [spec.mu_e, spec.mu_r, spec.mu_p];
        Self::assemble(spec, sizing, truth, None, reps, seed)
    }

    /// Truth on the boundary of `null`.
    pub fn type1(spec: DesignSpec, sizing: Sizing, null: Null, reps: u64, seed: u64) -> Self {
        Self::assemble(spec, sizing, null.boundary(&spec), Some(null), reps, seed)
    }

    /// Replace the truth means; the id records them.
    pub fn with_truth(mut self, truth: [f64; 3]) -> Self {
        self.truth = truth;
        self.id = self.canonical_id();
        self
    }

    fn assemble(spec: DesignSpec, sizing: Sizing, truth: [f64; 3], null: Option<Null>, reps: u64, seed: u64) -> Self {
        let mut c = ScenarioConfig {
            id: String::new(),
            spec,
            sizing,
            truth,
            null,
            reps,
            seed,
        };
        c.id = c.canonical_id();
        c
    }

    fn default_truth(&self) -> [f64; 3] {
        match self.null {
            Some(n) => n.boundary(&self.spec),
            None => [self.spec.mu_e, self.spec.mu_r, self.spec.mu_p],
        }
    }

    /// `FIXED` or the estimator code.
    pub fn method_label(&self) -> String {
        match self.sizing {
            Sizing::Fixed(_) => "FIXED".to_string(),
            Sizing::Reestimate(p) => p.method.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.reps == 0 {
            return Err(Error::domain("at least one replication is needed"));
        }
        if self.truth.iter().any(|m| !m.is_finite()) {
            return Err(Error::domain("truth means must be finite"));
        }
        match self.sizing {
            Sizing::Fixed(n) => {
                if n < self.spec.min_total() {
                    return Err(Error::domain(format!(
                        "fixed total {n} below the minimum {}",
                        self.spec.min_total()
                    )));
                }
            }
            Sizing::Reestimate(p) => p.validate(&self.spec.alloc)?,
        }
        Ok(())
    }

    /// `kind;key=value;...` with every input that is not the replication count or seed.
    pub fn canonical_id(&self) -> String {
        let s = &self.spec;
        let kind = match self.null {
            None => "power".to_string(),
            Some(n) => format!("t1e-{n}"),
        };
        let mut parts = vec![kind];
        match self.sizing {
            Sizing::Fixed(n) => parts.push(format!("n={n}")),
            Sizing::Reestimate(p) => {
                parts.push(format!("method={}", p.method));
                parts.push(format!("n1={}", p.n1));
                parts.push(format!("zeta={}", p.zeta));
                if p.block_size != s.alloc.block_size() {
                    parts.push(format!("m={}", p.block_size));
                }
                if !p.allow_downsizing {
                    parts.push(format!("planned={}", p.planned_total));
                }
            }
        }
        parts.push(format!("alloc={}", s.alloc));
        parts.push(format!("muE={}", s.mu_e));
        parts.push(format!("muR={}", s.mu_r));
        parts.push(format!("muP={}", s.mu_p));
        parts.push(format!("dER={}", s.delta_er));
        parts.push(format!("dEP={}", s.delta_ep));
        parts.push(format!("dRP={}", s.delta_rp));
        parts.push(format!("sigma={}", s.sigma));
        parts.push(format!("alpha={}", s.alpha));
        parts.push(format!("target={}", s.target_power));
        if s.critical != Critical::Normal {
            parts.push("crit=t".to_string());
        }
        if s.grid != SizeGrid::WholeBlocks {
            parts.push("grid=any".to_string());
        }
        if self.truth != self.default_truth() {
            let [a, b, c] = self.truth;
            parts.push(format!("truth={a},{b},{c}"));
        }
        parts.join(";")
    }

    /// Inverse of [`canonical_id`](Self::canonical_id). Equivalent spellings of a
    /// number are accepted; the returned config carries the canonical id.
    pub fn from_id(id: &str, reps: u64, seed: u64) -> Result<Self> {
        let bad = |msg: String| Error::domain(format!("scenario id {id:?}: {msg}"));
        let mut it = id.split(';');
        let kind = it.next().unwrap_or_default();
        let null = match kind {
            "power" => None,
            k if k.starts_with("t1e-") => Some(k[4..].parse::<Null>()?),
            other => return Err(bad(format!("unknown kind {other:?}"))),
        };
        let mut kv = BTreeMap::new();
        for part in it {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("field {part:?} is not key=value")))?;
            if kv.insert(k, v).is_some() {
                return Err(bad(format!("duplicate key {k:?}")));
            }
        }
        let mut take = |k: &str| kv.remove(k);
        let num = |v: Option<&str>, k: &str| -> Result<f64> {
            let v = v.ok_or_else(|| bad(format!("missing {k}")))?;
            v.parse::<f64>().map_err(|_| bad(format!("{k}={v} is not a number")))
        };
        let int = |v: Option<&str>, k: &str| -> Result<u64> {
            let v = v.ok_or_else(|| bad(format!("missing {k}")))?;
            v.parse::<u64>().map_err(|_| bad(format!("{k}={v} is not an integer")))
        };
        let alloc = take("alloc").ok_or_else(|| bad("missing alloc".into()))?.parse()?;
        let critical = match take("crit") {
            None => Critical::Normal,
            Some("t") => Critical::StudentT,
            Some(v) => return Err(bad(format!("crit={v}"))),
        };
        let grid = match take("grid") {
            None => SizeGrid::WholeBlocks,
            Some("any") => SizeGrid::AnyTotal,
            Some(v) => return Err(bad(format!("grid={v}"))),
        };
        let spec = DesignSpec::builder()
            .margins(
                num(take("dER"), "dER")?,
                num(take("dEP"), "dEP")?,
                num(take("dRP"), "dRP")?,
            )
            .means(
                num(take("muE"), "muE")?,
                num(take("muR"), "muR")?,
                num(take("muP"), "muP")?,
            )
            .sigma(num(take("sigma"), "sigma")?)
            .alpha(num(take("alpha"), "alpha")?)
            .target_power(num(take("target"), "target")?)
            .alloc(alloc)
            .critical(critical)
            .grid(grid)
            .build()?;
        let sizing = if let Some(n) = take("n") {
            Sizing::Fixed(int(Some(n), "n")?)
        } else {
            let method: Estimator = take("method").ok_or_else(|| bad("missing method".into()))?.parse()?;
            let mut p =
                ReestimationPolicy::new(method, int(take("n1"), "n1")?, &alloc).with_zeta(num(take("zeta"), "zeta")?);
            if let Some(m) = take("m") {
                p.block_size = int(Some(m), "m")?;
            }
            if let Some(planned) = take("planned") {
                p.allow_downsizing = false;
                p.planned_total = int(Some(planned), "planned")?;
            }
            Sizing::Reestimate(p)
        };
        let truth = take("truth")
            .map(|v| -> Result<[f64; 3]> {
                let xs: Vec<f64> = v
                    .split(',')
                    .map(|x| x.parse::<f64>().map_err(|_| bad(format!("truth={v}"))))
                    .collect::<Result<_>>()?;
                xs.try_into().map_err(|_| bad(format!("truth={v} needs three means")))
            })
            .transpose()?;
        if let Some(k) = kv.keys().next() {
            return Err(bad(format!("unknown key {k:?}")));
        }
        let mut c = ScenarioConfig::assemble(spec, sizing, [0.0; 3], null, reps, seed);
        c.truth = truth.unwrap_or_else(|| c.default_truth());
        c.id = c.canonical_id();
        Ok(c)
    }
}
