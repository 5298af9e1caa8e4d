use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use thiserror::Error;

use tnoisemod::montecarlo::run_sweep_with_progress;
use tnoisemod::{average_bep, EnergyNorm, SampleModel, Scheme};

use crate::config::{ConfigError, Experiment, Overrides, Preset};
use crate::report::{self, AnalyticRow};
use crate::selftest;

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;
pub const EXIT_SELFTEST: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "tnoisemod",
    version,
    about = "Ternary noise modulation: analytic BEP and Monte Carlo BER"
)]
pub struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    /// No progress lines on stderr.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the Rayleigh-averaged BEP over the delta grid, without simulation.
    Analyze(AnalyzeArgs),
    /// Run the Monte Carlo sweep and write CSV plus a manifest.
    Simulate(SimulateArgs),
    /// Run the internal consistency checks.
    Selftest,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// TOML configuration file.
    #[arg(short, long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Figure preset; replaces any preset named in the file.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,

    /// Samples per block.
    #[arg(long = "n", value_name = "N")]
    pub n: Option<usize>,

    /// Mean of active transmit samples.
    #[arg(long)]
    pub mu: Option<f64>,

    /// Low-state variance.
    #[arg(long = "sigma-l2")]
    pub sigma_l2: Option<f64>,

    /// High-to-low variance ratio.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Comma-separated delta grid in dB.
    #[arg(
        long = "delta-db",
        value_delimiter = ',',
        allow_hyphen_values = true,
        num_args = 1
    )]
    pub delta_db: Option<Vec<f64>>,

    /// One curve per mean value.
    #[arg(long = "mu-list", value_delimiter = ',', conflicts_with = "n_list")]
    pub mu_list: Option<Vec<f64>>,

    /// One curve per block length.
    #[arg(long = "n-list", value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,

    /// Transmit sample model: circular or real.
    #[arg(long = "sample-model")]
    pub sample_model: Option<SampleModel>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,

    /// Output CSV; `-` writes to stdout without a manifest.
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,

    /// Frames per point (accepts 1e6).
    #[arg(long, value_parser = parse_count)]
    pub trials: Option<u64>,

    /// Master seed; equal seeds give byte-identical output
    #[arg(long)]
    pub seed: Option<u64>,

    /// Baseline energy normalisation: equal-pair-energy or none.
    #[arg(long)]
    pub norm: Option<EnergyNorm>,

    /// Add the binary baseline.
    #[arg(long, conflicts_with = "no_baseline")]
    pub baseline: bool,

    /// Drop the binary baseline.
    #[arg(long = "no-baseline")]
    pub no_baseline: bool,

    /// Single baseline curve at this block length (implies --baseline).
    #[arg(long = "baseline-n", conflicts_with = "no_baseline")]
    pub baseline_n: Option<usize>,

    /// Output CSV; the manifest is written next to it.
    #[arg(short, long, default_value = "results.csv")]
    pub output: PathBuf,
}

/// Integer counts, also in `1e6` or `1_000_000` form.
fn parse_count(s: &str) -> Result<u64, String> {
    let clean = s.replace('_', "");
    if let Ok(v) = clean.parse::<u64>() {
        return Ok(v);
    }
    match clean.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 => Ok(v as u64),
        _ => Err(format!("{s:?} is not a non-negative integer")),
    }
}

#[derive(Debug, Error)]
pub enum Failure {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
    #[error("{0} selftest check(s) failed")]
    Selftest(usize),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Runtime(_) => EXIT_RUNTIME,
            Failure::Selftest(_) => EXIT_SELFTEST,
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("cannot write {}: {e}", path.display()))
}

impl ExperimentArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            n: self.n,
            mu: self.mu,
            sigma_l2: self.sigma_l2,
            alpha: self.alpha,
            sample_model: self.sample_model,
            delta_db: self.delta_db.clone(),
            mu_list: self.mu_list.clone(),
            n_list: self.n_list.clone(),
            ..Overrides::default()
        }
    }
}

/// `results.csv` -> `results.manifest.toml`.
pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.toml")
}

fn manifest_meta(command: &str, exp: &Experiment, csv: &Path) -> toml::Table {
    use toml::Value;
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let mut meta = toml::Table::new();
    meta.insert("tool".into(), Value::String("tnoisemod".into()));
    meta.insert(
        "version".into(),
        Value::String(env!("CARGO_PKG_VERSION").into()),
    );
    meta.insert("command".into(), Value::String(command.into()));
    meta.insert("created_unix".into(), Value::Integer(created as i64));
    meta.insert("output".into(), Value::String(csv.display().to_string()));
    if let Some(p) = exp.preset {
        meta.insert("preset".into(), Value::String(p.as_str().into()));
    }
    meta
}

fn write_outputs(
    command: &str,
    exp: &Experiment,
    csv_path: &Path,
    csv: &[u8],
) -> Result<(), Failure> {
    if csv_path == Path::new("-") {
        let mut stdout = io::stdout().lock();
        stdout
            .write_all(csv)
            .and_then(|_| stdout.flush())
            .map_err(|e| io_failure(csv_path, e))?;
        return Ok(());
    }
    fs::write(csv_path, csv).map_err(|e| io_failure(csv_path, e))?;
    let manifest = manifest_path(csv_path);
    let text = exp.to_toml(Some(manifest_meta(command, exp, csv_path)));
    fs::write(&manifest, text).map_err(|e| io_failure(&manifest, e))?;
    info!("wrote {} and {}", csv_path.display(), manifest.display());
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let e = &args.experiment;
    let exp = Experiment::resolve(e.config.as_deref(), e.preset, &e.overrides())?;
    let spec = exp.sweep_spec()?;
    let points = spec.points().map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut rows = Vec::new();
    for point in points.iter().filter(|p| p.scheme == Scheme::Ternary) {
        let bep = average_bep(&point.config).map_err(|e| {
            Failure::Runtime(format!(
                "N={} mu={} delta_db={}: {e}",
                point.config.n(),
                point.config.mu(),
                point.config.delta_db()
            ))
        })?;
        rows.push(AnalyticRow {
            config: point.config,
            bep,
        });
    }
    let mut csv = Vec::new();
    report::write_analysis(&mut csv, &rows).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_outputs("analyze", &exp, &args.output, &csv)
}

pub fn simulate(args: &SimulateArgs, quiet: bool) -> Result<(), Failure> {
    let e = &args.experiment;
    let mut overrides = e.overrides();
    overrides.trials = args.trials;
    overrides.seed = args.seed;
    overrides.norm = args.norm;
    overrides.baseline_n = args.baseline_n;
    overrides.baseline = if args.no_baseline {
        Some(false)
    } else if args.baseline {
        Some(true)
    } else {
        None
    };
    let exp = Experiment::resolve(e.config.as_deref(), e.preset, &overrides)?;
    let spec = exp.sweep_spec()?;
    info!(
        "{} points x {} frames, seed {}",
        spec.points().map_or(0, |p| p.len()),
        spec.trials,
        spec.seed
    );

    let records = run_sweep_with_progress(&spec, |done, total, r| {
        if !quiet {
            let analytic = r.analytic_bep.map(|p| format!(", analytic {p:.3e}")).unwrap_or_default();
            eprintln!(
                "[{done:>3}/{total}] {:<7} N={:<4} mu={:<5} delta={:>5} dB: ber {:.3e} ({} errors){analytic}",
                r.scheme.as_str(),
                r.config.n(),
                r.config.mu(),
                r.config.delta_db(),
                r.simulated_ber(),
                r.bit_errors,
            );
        }
    })
    .map_err(|e| Failure::Runtime(e.to_string()))?;

    let mut csv = Vec::new();
    report::write_simulation(&mut csv, &records).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_outputs("simulate", &exp, &args.output, &csv)?;

    let failed = records.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        for r in records.iter().filter_map(|r| r.error.as_deref()) {
            warn!("{r}");
        }
        return Err(Failure::Runtime(format!(
            "{failed} point(s) recorded errors; see the status column"
        )));
    }
    Ok(())
}

pub fn selftest() -> Result<(), Failure> {
    let checks = selftest::run();
    print!("{}", selftest::render(&checks));
    match checks.iter().filter(|c| !c.passed).count() {
        0 => Ok(()),
        n => Err(Failure::Selftest(n)),
    }
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Analyze(args) => analyze(args),
        Command::Simulate(args) => simulate(args, cli.quiet),
        Command::Selftest => selftest(),
    }
}
