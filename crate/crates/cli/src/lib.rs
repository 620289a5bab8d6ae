//! The `marketmode` command line: each subcommand runs one stage of the
//! pipeline from a [`config::RunConfig`] and writes plot-ready CSV files plus
//! a run log into the output directory.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod commands;
pub mod config;
mod io;

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Analysis(#[from] marketmode::Error),
}

impl CliError {
    /// 1 for analysis failures, 2 for I/O and configuration problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Analysis(e) => match e {
                marketmode::Error::Io { .. } | marketmode::Error::Parse { .. } => 2,
                _ => 1,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "marketmode", version, about = "Market-mode co-movement and MRW crash-precursor analysis")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Sampling interval (minutes) of the coarse return series.
    #[arg(long, global = true)]
    pub delta_t: Option<u32>,
    #[arg(long, global = true)]
    pub skip_open_minutes: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align bar files on the session grid and write prices and log-returns.
    Ingest(PanelArgs),
    /// Rolling correlation eigenvalues (per-day and sliding) and correlograms.
    Eigen(PanelArgs),
    /// Simulate an MRW path.
    Simulate(SimulateArgs),
    /// Estimate MRW parameters of an increment series.
    MrwFit(FitArgs),
    /// Sliding-window Var(omega) indicator, crash labels and their alignment.
    Precursor(PrecursorArgs),
    /// Autocorrelation of a series.
    Acf(AcfArgs),
    /// Cross-correlation of two series.
    Ccf(CcfArgs),
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    /// Bar files (`date,time,symbol,price`).
    #[arg(long = "input", num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Symbol list, one per line.
    #[arg(long)]
    pub symbols: Option<PathBuf>,
    /// Sessions such as `09:00-11:00,12:30-15:00`.
    #[arg(long)]
    pub sessions: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub l_over_dt: Option<f64>,
    /// Number of increments.
    #[arg(long)]
    pub len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitOptions {
    #[arg(long)]
    pub fit_lo: Option<usize>,
    #[arg(long)]
    pub fit_hi: Option<usize>,
    #[arg(long)]
    pub max_lag: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Increment series: a single column, or the `value` column of a
    /// market-mode file.
    pub series: Option<PathBuf>,
    #[arg(long)]
    pub column: Option<String>,
    #[command(flatten)]
    pub fit: FitOptions,
}

#[derive(Debug, Args)]
pub struct PrecursorArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
    /// Use this market-mode series instead of building one from bars.
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// Daily index file (`date,open,close`) for crash labelling.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Pre-labelled events (`date,daily_return,intraday_return`).
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long)]
    pub window_minutes: Option<u32>,
    #[arg(long)]
    pub step_minutes: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub crash_threshold: Option<f64>,
    /// `daily` or `intraday`.
    #[arg(long)]
    pub crash_basis: Option<String>,
    #[arg(long)]
    pub slope_window_days: Option<usize>,
    #[command(flatten)]
    pub fit: FitOptions,
}

#[derive(Debug, Args)]
pub struct AcfArgs {
    pub series: Option<PathBuf>,
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long)]
    pub max_lag: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CcfArgs {
    pub series: Option<PathBuf>,
    pub other: Option<PathBuf>,
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long)]
    pub other_column: Option<String>,
    #[arg(long)]
    pub max_lag: Option<usize>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn apply_panel(cfg: &mut RunConfig, a: PanelArgs) {
    if !a.inputs.is_empty() {
        cfg.input.files = a.inputs;
    }
    set_opt(&mut cfg.input.symbols, a.symbols);
    set(&mut cfg.grid.sessions, a.sessions);
}

fn apply_fit(cfg: &mut RunConfig, f: FitOptions) {
    set(&mut cfg.mrw.fit_lo, f.fit_lo);
    set_opt(&mut cfg.mrw.fit_hi, f.fit_hi);
    set_opt(&mut cfg.mrw.max_lag, f.max_lag);
}

/// Stage a subcommand runs once its flags are folded into the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Ingest,
    Eigen,
    Simulate,
    MrwFit,
    Precursor,
    Acf,
    Ccf,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Ingest => "ingest",
            Task::Eigen => "eigen",
            Task::Simulate => "simulate",
            Task::MrwFit => "mrw-fit",
            Task::Precursor => "precursor",
            Task::Acf => "acf",
            Task::Ccf => "ccf",
        }
    }
}

/// Effective configuration: the config file (or defaults) with flags on top.
pub fn resolve(cli: Cli) -> Result<(RunConfig, Task, Option<usize>), CliError> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let c = cli.common;
    set(&mut cfg.out_dir, c.out_dir);
    set(&mut cfg.seed, c.seed);
    set(&mut cfg.returns.delta_t, c.delta_t);
    set(&mut cfg.grid.skip_open_minutes, c.skip_open_minutes);
    let task = match cli.command {
        Command::Ingest(a) => {
            apply_panel(&mut cfg, a);
            Task::Ingest
        }
        Command::Eigen(a) => {
            apply_panel(&mut cfg, a);
            Task::Eigen
        }
        Command::Simulate(a) => {
            let s = &mut cfg.simulate;
            set(&mut s.sigma, a.sigma);
            set(&mut s.lambda2, a.lambda2);
            set(&mut s.l_over_dt, a.l_over_dt);
            set(&mut s.len, a.len);
            Task::Simulate
        }
        Command::MrwFit(a) => {
            set_opt(&mut cfg.mrw.series, a.series);
            set_opt(&mut cfg.mrw.column, a.column);
            apply_fit(&mut cfg, a.fit);
            Task::MrwFit
        }
        Command::Precursor(a) => {
            apply_panel(&mut cfg, a.panel);
            let p = &mut cfg.precursor;
            set_opt(&mut p.series, a.series);
            set_opt(&mut p.index, a.index);
            set_opt(&mut p.events, a.events);
            set(&mut p.window_minutes, a.window_minutes);
            set(&mut p.step_minutes, a.step_minutes);
            set(&mut p.crash_threshold, a.crash_threshold);
            set(&mut p.crash_basis, a.crash_basis);
            set(&mut p.slope_window_days, a.slope_window_days);
            apply_fit(&mut cfg, a.fit);
            Task::Precursor
        }
        Command::Acf(a) => {
            let k = &mut cfg.correlogram;
            set_opt(&mut k.series, a.series);
            set_opt(&mut k.column, a.column);
            set(&mut k.max_lag, a.max_lag);
            Task::Acf
        }
        Command::Ccf(a) => {
            let k = &mut cfg.correlogram;
            set_opt(&mut k.series, a.series);
            set_opt(&mut k.other, a.other);
            set_opt(&mut k.column, a.column);
            set_opt(&mut k.other_column, a.other_column);
            set(&mut k.max_lag, a.max_lag);
            Task::Ccf
        }
    };
    Ok((cfg, task, c.threads))
}

/// Parse arguments, run the subcommand and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<String, CliError> {
    let (cfg, task, threads) = resolve(cli)?;
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            pool.install(|| commands::dispatch(&cfg, task))
        }
        None => commands::dispatch(&cfg, task),
    }
}
