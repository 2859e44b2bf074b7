//! Command-line driver: figure sweeps, single sensitivity queries and the
//! oracle self-check.
//!
//! Exit codes: 0 success, 1 solver or I/O failure, 2 configuration error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use fluxnmr::sensitivity::{min_density, min_spin_number};
use fluxnmr::sweep::{result_table, run_plan, Plan, PLAN_NAMES};
use fluxnmr::table::Table;
use fluxnmr::Execution;
use serde::Serialize;

use config::{ConfigError, Overrides, RunConfig};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const CONFIG_ENV: &str = "FLUXNMR_CONFIG";

#[derive(Parser, Debug)]
#[command(name = "fluxnmr", version, about = "Flux-qubit NMR sensitivity model")]
struct Cli {
    /// TOML configuration file (default: $FLUXNMR_CONFIG, else built-in defaults).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (run.out).
    #[arg(long, global = true)]
    out: Option<String>,

    /// Voxel edge in metres (numerics.voxel_edge).
    #[arg(long, global = true)]
    resolution: Option<f64>,

    /// Worker threads (run.threads).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override a configuration value, e.g. `environment.b_ex=1.8e-3`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    sets: Vec<String>,

    /// polarization={paper,exact}, dephasing={total,block} or rf_offset={edge,center}. Repeatable.
    #[arg(long = "convention", value_name = "NAME=VALUE", global = true)]
    conventions: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the CSV tables of one or more figure plans (`all` for every built-in plan).
    Figure {
        #[arg(required = true)]
        names: Vec<String>,
    },
    /// Solve for a minimum detectable density or spin number.
    Query { kind: QueryKind },
    /// Compare closed forms with their brute-force references.
    Selfcheck,
    /// Print the resolved configuration.
    Config,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum QueryKind {
    MinDensity,
    MinNumber,
}

impl QueryKind {
    fn file_stem(self) -> &'static str {
        match self {
            QueryKind::MinDensity => "query_min_density",
            QueryKind::MinNumber => "query_min_number",
        }
    }
}

fn overrides(cli: &Cli) -> anyhow::Result<Overrides> {
    let mut o = Overrides::default();
    for s in &cli.sets {
        o.add(s, "--set")?;
    }
    for c in &cli.conventions {
        o.add_convention(c)?;
    }
    if let Some(out) = &cli.out {
        o.insert("run.out", toml::Value::String(out.clone()), "--out")?;
    }
    if let Some(r) = cli.resolution {
        o.insert("numerics.voxel_edge", toml::Value::Float(r), "--resolution")?;
    }
    if let Some(t) = cli.threads {
        let t = i64::try_from(t).map_err(|_| ConfigError(format!("--threads {t} is too large")))?;
        o.insert("run.threads", toml::Value::Integer(t), "--threads")?;
    }
    Ok(o)
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let path = cli.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    RunConfig::load(path.as_deref(), &overrides(cli)?)
}

fn init_threads(cfg: &RunConfig) -> anyhow::Result<()> {
    if let Some(n) = cfg.run.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting the worker pool")?;
    }
    Ok(())
}

struct Output {
    dir: PathBuf,
    header: Vec<String>,
}

impl Output {
    fn create(cfg: &RunConfig) -> anyhow::Result<Self> {
        let dir = PathBuf::from(&cfg.run.out);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write(&dir.join("resolved_config.toml"), &cfg.to_toml())?;
        Ok(Self { dir, header: vec![format!("fluxnmr {VERSION}"), format!("config sha256 {}", cfg.hash())] })
    }

    fn table(&self, t: &Table, extra: &[String]) -> anyhow::Result<PathBuf> {
        let mut comments = self.header.clone();
        comments.extend_from_slice(extra);
        let path = self.dir.join(format!("{}.csv", t.name));
        write(&path, &t.to_csv(&comments))?;
        Ok(path)
    }
}

/// Prints to stdout, tolerating a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn plans(names: &[String], cfg: &RunConfig) -> anyhow::Result<Vec<(String, Plan)>> {
    let mut out = Vec::new();
    for name in names {
        match name.as_str() {
            "all" => {
                for n in PLAN_NAMES {
                    out.push((n.to_string(), n.parse()?));
                }
            }
            "custom" => out.push((name.clone(), Plan::Custom(cfg.custom_plan()?))),
            other => out.push((
                name.clone(),
                other.parse().map_err(|_| {
                    ConfigError(format!(
                        "unknown figure `{other}`; expected one of {}, custom, all",
                        PLAN_NAMES.join(", ")
                    ))
                })?,
            )),
        }
    }
    Ok(out)
}

fn figure(cfg: &RunConfig, names: &[String]) -> anyhow::Result<()> {
    let plans = plans(names, cfg)?;
    let setup = cfg.setup()?;
    let out = Output::create(cfg)?;
    for (name, plan) in plans {
        for t in run_plan(&plan, &setup, Execution::default())? {
            let path = out.table(&t, &[format!("plan {name}")])?;
            emit(&format!("{}\n", path.display()));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct QuerySummary<'a> {
    version: &'a str,
    config_hash: String,
    query: &'a str,
    result: fluxnmr::SensitivityResult,
}

fn query(cfg: &RunConfig, kind: QueryKind) -> anyhow::Result<()> {
    let setup = cfg.setup()?;
    let scheme = cfg.scheme()?;
    let result = match kind {
        QueryKind::MinDensity => min_density(&setup, scheme, Execution::default())?,
        QueryKind::MinNumber => {
            min_spin_number(&setup, cfg.sample.placement, cfg.sample.size, scheme, Execution::default())?
        }
    };
    let out = Output::create(cfg)?;
    let stem = kind.file_stem();
    out.table(&result_table(stem, std::slice::from_ref(&result)), &[format!("query {stem}")])?;
    let summary = QuerySummary { version: VERSION, config_hash: cfg.hash(), query: stem, result };
    let json = serde_json::to_string_pretty(&summary)?;
    write(&out.dir.join(format!("{stem}.json")), &format!("{json}\n"))?;
    emit(&format!("{json}\n"));
    Ok(())
}

fn selfcheck() -> anyhow::Result<bool> {
    let mut all = true;
    for s in fluxnmr::selfcheck::run_selfcheck()? {
        all &= s.passed;
        emit(&format!(
            "{} {:<12} points={:<5} max_deviation={:.3e} tolerance={:.1e} ({})\n",
            if s.passed { "PASS" } else { "FAIL" },
            s.name,
            s.points,
            s.max_deviation,
            s.tolerance,
            s.measure
        ));
    }
    Ok(all)
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let cfg = load_config(cli)?;
    init_threads(&cfg)?;
    match &cli.command {
        Command::Figure { names } => figure(&cfg, names)?,
        Command::Query { kind } => query(&cfg, *kind)?,
        Command::Selfcheck => return selfcheck(),
        Command::Config => {
            emit(&format!("# fluxnmr {VERSION}\n# config sha256 {}\n{}", cfg.hash(), cfg.to_toml()));
        }
    }
    Ok(true)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let config = e.chain().any(|c| {
        c.downcast_ref::<ConfigError>().is_some()
            || matches!(c.downcast_ref::<fluxnmr::Error>(), Some(fluxnmr::Error::InvalidParameter { .. }))
    });
    if config {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
