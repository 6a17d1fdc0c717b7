use crate::config::{Config, CriticalChoice, DesignArgs, GridChoice, RunKind};
use crate::output::{csv_text, RunManifest, Sink};
use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use goldssr::design::{
    apportion, power_at_total, required_sample_size, Arm, Critical, DesignSpec, GroupSizes, SizeGrid,
};
use goldssr::estimators::{estimate, Estimator, TrialData};
use goldssr::presets::{self, POWER_N1, POWER_REPS, SMOKE_REPS, T1E_REPS};
use goldssr::reestimate::{
    expected_power, inflation_factor, reestimate_sample_size, sampling_density, ReestimationPolicy,
};
use goldssr::simulate::{write_csv, ScenarioConfig, SimulationReport, Simulator, Sizing};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const DEFAULT_SEED: u64 = 20_240_601;

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// The design as it was resolved, for echoing back.
#[derive(Debug, Clone, Serialize)]
struct DesignEcho {
    delta_er: f64,
    delta_ep: f64,
    delta_rp: f64,
    mu_e: f64,
    mu_r: f64,
    mu_p: f64,
    sigma: f64,
    alloc: String,
    alpha: f64,
    target_power: f64,
    critical: CriticalChoice,
    grid: GridChoice,
}

impl From<&DesignSpec> for DesignEcho {
    fn from(s: &DesignSpec) -> Self {
        DesignEcho {
            delta_er: s.delta_er,
            delta_ep: s.delta_ep,
            delta_rp: s.delta_rp,
            mu_e: s.mu_e,
            mu_r: s.mu_r,
            mu_p: s.mu_p,
            sigma: s.sigma,
            alloc: s.alloc.to_string(),
            alpha: s.alpha,
            target_power: s.target_power,
            critical: match s.critical {
                Critical::Normal => CriticalChoice::Z,
                Critical::StudentT => CriticalChoice::T,
            },
            grid: match s.grid {
                SizeGrid::WholeBlocks => GridChoice::Blocks,
                SizeGrid::AnyTotal => GridChoice::Any,
            },
        }
    }
}

impl DesignEcho {
    fn lines(&self) -> Vec<(&'static str, String)> {
        vec![
            ("delta_er", self.delta_er.to_string()),
            ("delta_ep", self.delta_ep.to_string()),
            ("delta_rp", self.delta_rp.to_string()),
            ("mu_e", self.mu_e.to_string()),
            ("mu_r", self.mu_r.to_string()),
            ("mu_p", self.mu_p.to_string()),
            ("sigma", self.sigma.to_string()),
            ("alloc", self.alloc.clone()),
            ("alpha", self.alpha.to_string()),
            ("target_power", self.target_power.to_string()),
            ("critical", format!("{:?}", self.critical).to_lowercase()),
            ("grid", format!("{:?}", self.grid).to_lowercase()),
        ]
    }
}

fn print_lines(lines: &[(&str, String)]) -> String {
    let width = lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    lines.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
}

fn json_text<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Options shared by the analytic commands.
#[derive(Debug, Clone, Args)]
pub struct AnalyticArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    /// TOML configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write results into this directory instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit JSON instead of text
    #[arg(long)]
    pub json: bool,
}

impl AnalyticArgs {
    fn load(&self) -> Result<(Config, DesignSpec, Sink)> {
        let cfg = Config::load_opt(self.config.as_deref())?;
        let spec = self.design.resolve(&cfg.design)?;
        Ok((cfg, spec, Sink::new(self.out.as_deref())?))
    }

    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest::new(
            command,
            self.config.as_deref(),
            self.out.as_deref().unwrap_or(Path::new("-")),
        )
    }
}

#[derive(Debug, Serialize)]
struct PowerRecord {
    #[serde(flatten)]
    design: DesignEcho,
    n: u64,
    group_sizes: [f64; 3],
    power: f64,
}

pub fn power(args: &AnalyticArgs, n: u64) -> Result<()> {
    let (_, spec, sink) = args.load()?;
    let sizes = GroupSizes::from_total(n as f64, &spec.alloc);
    let rec = PowerRecord {
        design: DesignEcho::from(&spec),
        n,
        group_sizes: sizes.as_array(),
        power: round6(power_at_total(&spec, n as f64)?),
    };
    if args.json {
        sink.emit("power.json", json_text(&rec)?.as_bytes())?;
    } else {
        let mut lines = rec.design.lines();
        let [e, r, p] = rec.group_sizes;
        lines.push(("n", n.to_string()));
        lines.push(("group_sizes", format!("{e} {r} {p}")));
        lines.push(("power", format!("{:.6}", rec.power)));
        sink.emit("power.txt", print_lines(&lines).as_bytes())?;
    }
    sink.manifest(&args.manifest("power"))
}

#[derive(Debug, Serialize)]
struct SizeRecord {
    #[serde(flatten)]
    design: DesignEcho,
    n: u64,
    group_sizes: [u64; 3],
    power: f64,
}

impl SizeRecord {
    fn new(spec: &DesignSpec) -> Result<Self> {
        let s = required_sample_size(spec)?;
        Ok(SizeRecord {
            design: DesignEcho::from(spec),
            n: s.total,
            group_sizes: s.sizes.as_array().map(|x| x as u64),
            power: round6(s.power),
        })
    }

    fn csv_row(&self) -> Vec<String> {
        let d = &self.design;
        let [e, r, p] = self.group_sizes;
        vec![
            d.delta_er.to_string(),
            d.mu_p.to_string(),
            d.alloc.clone(),
            d.sigma.to_string(),
            self.n.to_string(),
            e.to_string(),
            r.to_string(),
            p.to_string(),
            format!("{:.6}", self.power),
        ]
    }
}

const SIZE_HEADER: [&str; 9] = ["delta_ER", "mu_P", "alloc", "sigma", "n", "n_E", "n_R", "n_P", "power"];

/// One design from flags, or a CSV over the config grid.
pub fn samplesize(args: &AnalyticArgs) -> Result<()> {
    let (cfg, spec, sink) = args.load()?;
    if cfg.grid.is_empty() {
        let rec = SizeRecord::new(&spec)?;
        if args.json {
            sink.emit("samplesize.json", json_text(&rec)?.as_bytes())?;
        } else {
            let mut lines = rec.design.lines();
            let [e, r, p] = rec.group_sizes;
            lines.push(("n", rec.n.to_string()));
            lines.push(("group_sizes", format!("{e} {r} {p}")));
            lines.push(("power", format!("{:.6}", rec.power)));
            sink.emit("samplesize.txt", print_lines(&lines).as_bytes())?;
        }
    } else {
        let recs: Vec<SizeRecord> = cfg
            .grid
            .designs(&spec)?
            .iter()
            .map(SizeRecord::new)
            .collect::<Result<_>>()?;
        if args.json {
            sink.emit("samplesize.json", json_text(&recs)?.as_bytes())?;
        } else {
            let rows: Vec<Vec<String>> = recs.iter().map(SizeRecord::csv_row).collect();
            sink.emit("samplesize.csv", csv_text(&SIZE_HEADER, &rows).as_bytes())?;
        }
    }
    sink.manifest(&args.manifest("samplesize"))
}

#[derive(Debug, Serialize)]
struct ZetaRecord {
    delta_er: f64,
    mu_p: f64,
    alloc: String,
    sigma: f64,
    n1: u64,
    block_size: u64,
    n_fixed: u64,
    /// Expected power of the uninflated procedure.
    expected_power: Option<f64>,
    zeta: Option<f64>,
    note: String,
}

const ZETA_HEADER: [&str; 10] = [
    "delta_ER",
    "mu_P",
    "alloc",
    "sigma",
    "n1",
    "m",
    "n_fixed",
    "expected_power_zeta1",
    "zeta",
    "note",
];

/// Inflation factor of the block-sum procedure for each design and pilot size.
pub fn zeta(args: &AnalyticArgs, n1: &[u64]) -> Result<()> {
    let (cfg, spec, sink) = args.load()?;
    let pilots = if n1.is_empty() {
        cfg.grid.pilots(&POWER_N1)
    } else {
        n1.to_vec()
    };
    if cfg.grid.methods()?.iter().any(|m| *m != Estimator::XingGanju) {
        bail!("the inflation factor is only defined for the XG estimator");
    }
    let mut recs = Vec::new();
    for s in cfg.grid.designs(&spec)? {
        let n_fixed = required_sample_size(&s)?.total;
        for &n1 in &pilots {
            let p = ReestimationPolicy::new(Estimator::XingGanju, n1, &s.alloc);
            let mut rec = ZetaRecord {
                delta_er: s.delta_er,
                mu_p: s.mu_p,
                alloc: s.alloc.to_string(),
                sigma: s.sigma,
                n1,
                block_size: p.block_size,
                n_fixed,
                expected_power: None,
                zeta: None,
                note: String::new(),
            };
            let solved = p
                .validate(&s.alloc)
                .and_then(|_| sampling_density(&s, &p))
                .and_then(|d| Ok((expected_power(&s, &p, &d)?, inflation_factor(&s, &p)?)));
            match solved {
                Ok((e, z)) => {
                    rec.expected_power = Some(round6(e));
                    rec.zeta = Some(round6(z));
                }
                Err(e) => rec.note = e.to_string(),
            }
            recs.push(rec);
        }
    }
    if args.json {
        sink.emit("zeta.json", json_text(&recs)?.as_bytes())?;
    } else {
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6}"));
        let rows: Vec<Vec<String>> = recs
            .iter()
            .map(|r| {
                vec![
                    r.delta_er.to_string(),
                    r.mu_p.to_string(),
                    r.alloc.clone(),
                    r.sigma.to_string(),
                    r.n1.to_string(),
                    r.block_size.to_string(),
                    r.n_fixed.to_string(),
                    opt(r.expected_power),
                    opt(r.zeta),
                    // Keep the cell free of CSV delimiters.
                    r.note.replace([',', '"'], " "),
                ]
            })
            .collect();
        sink.emit("zeta.csv", csv_text(&ZETA_HEADER, &rows).as_bytes())?;
    }
    sink.manifest(&args.manifest("zeta"))
}

/// Outcomes with optional labels and blocks, one subject per line. Columns
/// are separated by whitespace or commas; blank lines and `#` comments are skipped.
pub fn read_data_file(text: &str) -> Result<TrialData> {
    let mut y = Vec::new();
    let mut labels = Vec::new();
    let mut blocks = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|c| !c.is_empty())
            .collect();
        let at = || format!("line {}", i + 1);
        if cols.len() > 3 {
            bail!("{}: expected at most 3 columns, found {}", at(), cols.len());
        }
        if *width.get_or_insert(cols.len()) != cols.len() {
            bail!(
                "{}: {} columns where earlier lines have {}",
                at(),
                cols.len(),
                width.unwrap()
            );
        }
        y.push(
            cols[0]
                .parse::<f64>()
                .with_context(|| format!("{}: outcome {:?}", at(), cols[0]))?,
        );
        if let Some(l) = cols.get(1) {
            labels.push(l.parse::<Arm>().with_context(at)?);
        }
        if let Some(b) = cols.get(2) {
            blocks.push(
                b.parse::<usize>()
                    .with_context(|| format!("{}: block index {b:?}", at()))?,
            );
        }
    }
    let width = width.unwrap_or(1);
    Ok(TrialData::new(
        y,
        (width >= 2).then_some(labels),
        (width == 3).then_some(blocks),
    )?)
}

#[derive(Debug, Serialize)]
struct EstimateRecord {
    method: Estimator,
    estimate: f64,
    raw: f64,
    n1: usize,
    block_size: Option<usize>,
    n_reest: u64,
}

/// Run estimators on a pilot. Without `--method`, every estimator the file supports.
pub fn estimate_file(args: &AnalyticArgs, file: &Path, methods: &[Estimator]) -> Result<()> {
    let (_, spec, sink) = args.load()?;
    let text = std::fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    let data = read_data_file(&text).with_context(|| format!("in {}", file.display()))?;
    let methods: Vec<Estimator> = if methods.is_empty() {
        Estimator::ALL
            .into_iter()
            .filter(|m| match m {
                Estimator::Pooled => data.labels().is_some(),
                Estimator::XingGanju => data.blocks().is_some(),
                _ => true,
            })
            .collect()
    } else {
        methods.to_vec()
    };
    let n = data.n1();
    let weights = match data.group_counts() {
        Some(c) => c.map(|k| k as f64 / n as f64),
        None => apportion(n as u64, &spec.alloc).map(|k| k as f64 / n as f64),
    };
    let mut recs = Vec::new();
    for m in methods {
        let view = if m.is_blinded() { data.blinded() } else { data.clone() };
        let est = estimate(m, &view, [spec.mu_e, spec.mu_r, spec.mu_p], weights).with_context(|| format!("{m}"))?;
        recs.push(EstimateRecord {
            method: m,
            estimate: est.value,
            raw: est.meta.raw,
            n1: n,
            block_size: est.meta.block_size,
            n_reest: reestimate_sample_size(&spec, &est)?,
        });
    }
    if args.json {
        sink.emit("estimate.json", json_text(&recs)?.as_bytes())?;
    } else {
        let rows: Vec<Vec<String>> = recs
            .iter()
            .map(|r| {
                vec![
                    r.method.to_string(),
                    format!("{:.6}", r.estimate),
                    format!("{:.6}", r.raw),
                    r.n_reest.to_string(),
                ]
            })
            .collect();
        sink.emit(
            "estimate.csv",
            csv_text(&["method", "estimate", "raw", "n_reest"], &rows).as_bytes(),
        )?;
    }
    sink.manifest(&args.manifest("estimate"))
}

/// Options shared by the simulation commands.
#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Write results into this directory instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed [default: from the config, else 20240601]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for one per core [default: 0]
    #[arg(long)]
    pub workers: Option<usize>,
    /// Replications per scenario; overrides --smoke
    #[arg(long)]
    pub reps: Option<u64>,
    /// Reduced replication count for quick checks
    #[arg(long)]
    pub smoke: bool,
}

impl SimArgs {
    fn reps(&self, configured: Option<u64>, default: u64) -> u64 {
        self.reps
            .or(self.smoke.then_some(SMOKE_REPS))
            .or(configured)
            .unwrap_or(default)
    }
}

fn run_all(scenarios: &[ScenarioConfig], workers: usize) -> Result<Vec<SimulationReport>> {
    let total = scenarios.len();
    scenarios
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let t = Instant::now();
            let r = Simulator::new(c.clone())
                .and_then(|s| s.run(workers))
                .with_context(|| format!("scenario {}", c.id))?;
            eprintln!("[{}/{total}] {} ({:.1} s)", i + 1, c.id, t.elapsed().as_secs_f64());
            Ok(r)
        })
        .collect()
}

fn emit_simulation(
    sink: &Sink,
    name: &str,
    scenarios: &[ScenarioConfig],
    workers: usize,
    mut manifest: RunManifest,
) -> Result<()> {
    manifest.scenarios = scenarios.iter().map(|c| c.id.clone()).collect();
    manifest.validate()?;
    let reports = run_all(scenarios, workers)?;
    let mut buf = Vec::new();
    write_csv(&mut buf, &reports)?;
    sink.emit(name, &buf)?;
    sink.manifest(&manifest)
}

/// Scenarios of a configuration file.
pub fn config_scenarios(cfg: &Config, base: &DesignSpec, reps: u64, seed: u64) -> Result<Vec<ScenarioConfig>> {
    let sim = &cfg.simulation;
    let kind = sim.kind.unwrap_or_default();
    let designs = cfg.grid.designs(base)?;
    let mut out = Vec::new();
    if kind == RunKind::Fixed {
        if cfg.grid.n1.is_some() || cfg.grid.method.is_some() || sim.zeta.is_some() {
            bail!("fixed runs have no pilot: remove grid.n1, grid.method and simulation.zeta");
        }
        for spec in designs {
            let n = required_sample_size(&spec)?.total;
            out.push(ScenarioConfig::power(spec, Sizing::Fixed(n), reps, seed));
        }
        return Ok(out);
    }
    let zeta = sim.fixed_zeta()?;
    let methods = cfg.grid.methods()?;
    let pilots = cfg.grid.pilots(&[30]);
    let nulls = match kind {
        RunKind::T1e => sim.null_runs()?.into_iter().map(Some).collect(),
        _ => vec![None],
    };
    for null in nulls {
        for spec in &designs {
            for &method in &methods {
                for &n1 in &pilots {
                    let mut p = ReestimationPolicy::new(method, n1, &spec.alloc);
                    if sim.allow_downsizing == Some(false) {
                        p.allow_downsizing = false;
                        p.planned_total = required_sample_size(spec)?.total;
                    }
                    p.zeta = match zeta {
                        Some(z) => z,
                        None => inflation_factor(spec, &p).with_context(|| format!("{method} n1={n1}"))?,
                    };
                    let sizing = Sizing::Reestimate(p);
                    out.push(match null {
                        Some(h) => ScenarioConfig::type1(*spec, sizing, h, reps, seed),
                        None => ScenarioConfig::power(*spec, sizing, reps, seed),
                    });
                }
            }
        }
    }
    Ok(out)
}

pub fn simulate(args: &SimArgs, config: Option<&Path>, ids: &[String]) -> Result<()> {
    let cfg = Config::load_opt(config)?;
    let sink = Sink::new(args.out.as_deref())?;
    let seed = args.seed.or(cfg.simulation.seed).unwrap_or(DEFAULT_SEED);
    let workers = args.workers.or(cfg.simulation.workers).unwrap_or(0);
    let scenarios = if ids.is_empty() {
        let default = if cfg.simulation.kind == Some(RunKind::T1e) {
            T1E_REPS
        } else {
            POWER_REPS
        };
        let reps = args.reps(cfg.simulation.reps, default);
        let base = DesignArgs::default().resolve(&cfg.design)?;
        config_scenarios(&cfg, &base, reps, seed)?
    } else {
        ids.iter()
            .map(|id| {
                let default = if id.starts_with("t1e") { T1E_REPS } else { POWER_REPS };
                Ok(ScenarioConfig::from_id(
                    id,
                    args.reps(cfg.simulation.reps, default),
                    seed,
                )?)
            })
            .collect::<Result<_>>()?
    };
    let mut m = RunManifest::new("simulate", config, args.out.as_deref().unwrap_or(Path::new("-")));
    m.seed = Some(seed);
    m.workers = Some(workers);
    m.reps = scenarios.first().map(|c| c.reps);
    emit_simulation(&sink, "simulate.csv", &scenarios, workers, m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    /// Fixed-design sample sizes
    #[value(name = "table4")]
    FixedSizes,
    /// Power of every procedure over the pilot sizes
    #[value(name = "fig2")]
    PowerCurves,
    /// Final sample size distributions of OS and XG
    #[value(name = "fig3")]
    SizeDistributions,
    /// Power of XG with the optimal inflation factor
    #[value(name = "fig5")]
    InflatedPower,
    /// Type I error over the full null grid
    #[value(name = "t1e")]
    TypeOneError,
}

impl Target {
    fn name(self) -> String {
        self.to_possible_value()
            .expect("no skipped variants")
            .get_name()
            .to_string()
    }
}

pub fn reproduce(args: &SimArgs, target: Target) -> Result<()> {
    let sink = Sink::new(args.out.as_deref())?;
    let name = target.name();
    let file = format!("{name}.csv");
    let mut m = RunManifest::new(
        &format!("reproduce {name}"),
        None,
        args.out.as_deref().unwrap_or(Path::new("-")),
    );
    if target == Target::FixedSizes {
        let recs: Vec<SizeRecord> = presets::fixed_designs()
            .iter()
            .map(SizeRecord::new)
            .collect::<Result<_>>()?;
        let rows: Vec<Vec<String>> = recs.iter().map(SizeRecord::csv_row).collect();
        sink.emit(&file, csv_text(&SIZE_HEADER, &rows).as_bytes())?;
        return sink.manifest(&m);
    }
    let seed = args.seed.unwrap_or(DEFAULT_SEED);
    let workers = args.workers.unwrap_or(0);
    let reps = args.reps(
        None,
        if target == Target::TypeOneError {
            T1E_REPS
        } else {
            POWER_REPS
        },
    );
    let scenarios = match target {
        Target::PowerCurves => presets::power_scenarios(reps, seed),
        Target::SizeDistributions => presets::size_scenarios(reps, seed),
        Target::InflatedPower => presets::inflated_scenarios(&POWER_N1, reps, seed)?,
        Target::TypeOneError => presets::t1e_scenarios(reps, seed),
        Target::FixedSizes => unreachable!(),
    };
    m.seed = Some(seed);
    m.workers = Some(workers);
    m.reps = Some(reps);
    emit_simulation(&sink, &file, &scenarios, workers, m)
}
