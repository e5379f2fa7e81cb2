//! Command-line driver: config parsing, the `sweep`, `run` and `maze`
//! commands, and the artifacts they write.

pub mod config;
pub mod scenario;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use msn_core::metrics::{self, SweepStatistic};
use msn_core::network;
use serde::Serialize;
use thiserror::Error;

pub use config::{parse_maze_config, parse_sim_config, MazeScenarioConfig, SimSettings};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config line {line}: field `{field}`: {message}")]
    ConfigField {
        line: usize,
        field: String,
        message: String,
    },

    #[error("config field `{field}`: {message}")]
    ConfigInvalid { field: String, message: String },

    #[error("config line {line}: unknown field `{key}`")]
    ConfigUnknown { line: usize, key: String },

    #[error("{0}")]
    Core(#[from] msn_core::Error),

    #[error("{path}: {cause}")]
    Io {
        path: PathBuf,
        cause: std::io::Error,
    },

    #[error("invalid argument {flag}: {message}")]
    Argument { flag: &'static str, message: String },
}

impl CliError {
    fn io(path: &Path, cause: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            cause,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "msn", version, about = "Machine social network simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Average connections per machine across a grid of thresholds.
    Sweep(SweepArgs),
    /// A single simulation with a per-step trace.
    Run(CommonArgs),
    /// Solo, cooperative and archive-assisted maze escapes.
    Maze(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Configuration file (`key = value` lines); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; created if missing (its parent must exist).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed from the config file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Seeds to average over: comma-separated values or inclusive ranges `a..b`.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Comma-separated thresholds in [0, 1]; defaults to 0, 0.05, ..., 1.
    #[arg(long)]
    pub thresholds: Option<String>,
    /// Use the time-averaged statistic regardless of the config.
    #[arg(long)]
    pub time_average: bool,
}

/// Record of one command invocation, written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub emitted_files: Vec<String>,
}

pub const DEFAULT_SEEDS: std::ops::RangeInclusive<u64> = 1..=20;

pub fn default_thresholds() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

pub fn parse_thresholds(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |message: String| CliError::Argument {
        flag: "--thresholds",
        message,
    };
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim) {
        let v: f64 = item
            .parse()
            .map_err(|_| bad(format!("cannot parse {item:?}")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(bad(format!("{v} is outside [0, 1]")));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = |message: String| CliError::Argument {
        flag: "--seeds",
        message,
    };
    let num = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| bad(format!("cannot parse {s:?}")))
    };
    let mut out = Vec::new();
    for item in text.split(',') {
        match item.split_once("..") {
            Some((lo, hi)) => {
                let (lo, hi) = (num(lo)?, num(hi)?);
                if lo > hi {
                    return Err(bad(format!("empty range {lo}..{hi}")));
                }
                out.extend(lo..=hi);
            }
            None => out.push(num(item)?),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_text(
    dir: &Path,
    name: &str,
    text: &str,
    emitted: &mut Vec<String>,
) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    emitted.push(name.to_string());
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Creates `dir` if it is missing; its parent must already exist.
pub fn prepare_output_dir(dir: &Path) -> Result<(), CliError> {
    if dir.is_dir() {
        return Ok(());
    }
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(p) = parent {
        if !p.is_dir() {
            return Err(CliError::io(
                dir,
                std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    "parent directory does not exist",
                ),
            ));
        }
    }
    fs::create_dir(dir).map_err(|e| CliError::io(dir, e))
}

fn load_sim_settings(path: Option<&Path>) -> Result<SimSettings, CliError> {
    match path {
        Some(p) => parse_sim_config(&read_text(p)?),
        None => Ok(SimSettings::default()),
    }
}

fn finish(
    command: &str,
    common: &CommonArgs,
    mut emitted: Vec<String>,
) -> Result<RunManifest, CliError> {
    let mut manifest = RunManifest {
        command: command.to_string(),
        config_path: common.config.clone(),
        output_dir: common.out.clone(),
        seed_override: common.seed,
        emitted_files: Vec::new(),
    };
    emitted.push("manifest.json".into());
    manifest.emitted_files = emitted;
    let path = common.out.join("manifest.json");
    fs::write(&path, to_json(&manifest)).map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<RunManifest, CliError> {
    let mut settings = load_sim_settings(args.common.config.as_deref())?;
    if let Some(seed) = args.common.seed {
        settings.sim.seed = seed;
    }
    let thresholds = match &args.thresholds {
        Some(t) => parse_thresholds(t)?,
        None => default_thresholds(),
    };
    let seeds = match (&args.seeds, args.common.seed) {
        (Some(s), _) => parse_seeds(s)?,
        (None, Some(seed)) => vec![seed],
        (None, None) => DEFAULT_SEEDS.collect(),
    };
    let statistic = if args.time_average {
        SweepStatistic::TimeAverage
    } else {
        settings.statistic
    };
    prepare_output_dir(&args.common.out)?;

    let results = metrics::threshold_sweep(
        &settings.sim,
        &thresholds,
        &seeds,
        settings.baseline,
        statistic,
    )?;
    let crossover = metrics::crossover_threshold(&results)?;

    let mut emitted = Vec::new();
    write_text(
        &args.common.out,
        "sweep.csv",
        &metrics::to_csv(&results),
        &mut emitted,
    )?;
    write_text(
        &args.common.out,
        "sweep.json",
        &to_json(&results),
        &mut emitted,
    )?;

    print!("{}", metrics::to_csv(&results));
    match crossover {
        Some(c) => println!("crossover c_th: {}", metrics::format_sig6(c)),
        None => println!("crossover c_th: none"),
    }
    finish("sweep", &args.common, emitted)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    config: &'a network::SimConfig,
    steps: u64,
    final_links: usize,
    final_mean_connections: f64,
    final_components: usize,
    baseline_connections: f64,
}

pub fn cmd_run(args: &CommonArgs) -> Result<RunManifest, CliError> {
    let mut settings = load_sim_settings(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        settings.sim.seed = seed;
    }
    prepare_output_dir(&args.out)?;

    let (net, trace) = network::run(settings.sim.clone())?;
    let mut csv = String::from("step,formed,expired,live_links,mean_connections\n");
    for (r, mean) in trace.reports.iter().zip(trace.mean_connections()) {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.step,
            r.formed,
            r.expired,
            r.live,
            metrics::format_sig6(mean)
        ));
    }
    let summary = RunSummary {
        config: &settings.sim,
        steps: trace.reports.len() as u64,
        final_links: net.link_count(),
        final_mean_connections: metrics::average_connections(&net),
        final_components: metrics::component_count(&net),
        baseline_connections: settings
            .baseline
            .average_connections(settings.sim.machine_count, settings.sim.seed)?,
    };

    let mut emitted = Vec::new();
    write_text(&args.out, "run.csv", &csv, &mut emitted)?;
    write_text(&args.out, "run.json", &to_json(&summary), &mut emitted)?;
    println!(
        "steps {}: {} links, {} connections per machine, {} components",
        summary.steps,
        summary.final_links,
        metrics::format_sig6(summary.final_mean_connections),
        summary.final_components
    );
    finish("run", args, emitted)
}

pub fn cmd_maze(args: &CommonArgs) -> Result<RunManifest, CliError> {
    let (mut config, world) = match &args.config {
        Some(path) => {
            let base = path.parent().unwrap_or(Path::new(""));
            let config = parse_maze_config(&read_text(path)?, base)?;
            let world = match &config.maze {
                Some(m) => msn_core::maze::MazeWorld::parse(&read_text(m)?)?,
                None => scenario::bundled_maze(),
            };
            (config, world)
        }
        None => (MazeScenarioConfig::default(), scenario::bundled_maze()),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    prepare_output_dir(&args.out)?;

    let report = scenario::run_scenario(&world, &config)?;
    let mut emitted = Vec::new();
    write_text(
        &args.out,
        "maze_report.json",
        &to_json(&report),
        &mut emitted,
    )?;
    for (name, r) in [
        ("solo", &report.solo),
        ("cooperative", &report.cooperative),
        ("archive", &report.archive),
    ] {
        let steps: Vec<String> = r
            .agents
            .iter()
            .map(|a| {
                format!(
                    "agent {}: {}{}",
                    a.id,
                    a.steps_taken,
                    if a.escaped { "" } else { " (stuck)" }
                )
            })
            .collect();
        println!("{name}: {}", steps.join(", "));
    }
    println!("shortest path: {}", report.shortest_path);
    finish("maze", args, emitted)
}

pub fn execute(cli: &Cli) -> Result<RunManifest, CliError> {
    match &cli.command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Run(a) => cmd_run(a),
        Command::Maze(a) => cmd_maze(a),
    }
}
