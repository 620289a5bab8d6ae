//! Run configuration: a TOML file of `key = value` pairs in sections, with
//! command-line flags applied on top.

use std::path::{Path, PathBuf};

use marketmode::comovement::Weighting;
use marketmode::mrw::{FitRange, MrwParams};
use marketmode::panel::GridSpec;
use marketmode::precursor::{CrashBasis, SlidingConfig, DEFAULT_CRASH_THRESHOLD, DEFAULT_SLOPE_WINDOW_DAYS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub input: InputConfig,
    pub grid: GridConfig,
    pub returns: ReturnsConfig,
    pub eigen: EigenConfig,
    pub simulate: SimulateConfig,
    pub mrw: MrwConfig,
    pub precursor: PrecursorConfig,
    pub correlogram: CorrelogramConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            input: InputConfig::default(),
            grid: GridConfig::default(),
            returns: ReturnsConfig::default(),
            eigen: EigenConfig::default(),
            simulate: SimulateConfig::default(),
            mrw: MrwConfig::default(),
            precursor: PrecursorConfig::default(),
            correlogram: CorrelogramConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Minute-bar files (`date,time,symbol,price`).
    pub files: Vec<PathBuf>,
    /// One symbol per line; every symbol in the files when absent.
    pub symbols: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub sessions: String,
    pub skip_open_minutes: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        GridConfig {
            sessions: g.sessions_string(),
            skip_open_minutes: g.skip_open_minutes,
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec, CliError> {
        GridSpec::parse_sessions(&self.sessions, self.skip_open_minutes)
            .map_err(|e| CliError::Config(format!("grid: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReturnsConfig {
    /// Sampling interval of the per-day correlation series.
    pub fine_delta_t: u32,
    /// Sampling interval of the sliding-window, market-mode and MRW series.
    pub delta_t: u32,
}

impl Default for ReturnsConfig {
    fn default() -> Self {
        ReturnsConfig {
            fine_delta_t: 1,
            delta_t: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenConfig {
    pub sliding_width_days: usize,
    pub sliding_step_days: usize,
    /// Largest lag of the correlograms of the per-day eigenvalue series.
    pub max_lag: usize,
    /// Write one `symbol,weight` file per snapshot.
    pub write_weights: bool,
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig {
            sliding_width_days: 5,
            sliding_step_days: 1,
            max_lag: 20,
            write_weights: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub sigma: f64,
    pub lambda2: f64,
    pub l_over_dt: f64,
    pub len: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            sigma: 1.0,
            lambda2: 0.014,
            l_over_dt: 1024.0,
            len: 1 << 17,
        }
    }
}

impl SimulateConfig {
    pub fn params(&self) -> MrwParams {
        MrwParams::unit(self.sigma, self.lambda2, self.l_over_dt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MrwConfig {
    /// Series file for `mrw-fit`.
    pub series: Option<PathBuf>,
    /// Column of the series file; `value` or the only column when absent.
    pub column: Option<String>,
    pub fit_lo: usize,
    pub fit_hi: Option<usize>,
    pub max_lag: Option<usize>,
    /// Days per block when projecting the panel on its market mode.
    pub block_days: usize,
    /// `per-window` or `global`.
    pub weighting: String,
}

impl Default for MrwConfig {
    fn default() -> Self {
        MrwConfig {
            series: None,
            column: None,
            fit_lo: FitRange::default().lo,
            fit_hi: None,
            max_lag: None,
            block_days: 5,
            weighting: "per-window".into(),
        }
    }
}

impl MrwConfig {
    pub fn fit_range(&self) -> FitRange {
        FitRange {
            lo: self.fit_lo,
            hi: self.fit_hi,
        }
    }

    pub fn weighting(&self) -> Result<Weighting, CliError> {
        match self.weighting.as_str() {
            "per-window" => Ok(Weighting::PerWindow),
            "global" => Ok(Weighting::Global),
            other => Err(CliError::Config(format!(
                "mrw.weighting must be \"per-window\" or \"global\", got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrecursorConfig {
    /// Market-mode series file; built from the bar files when absent.
    pub series: Option<PathBuf>,
    /// Daily index file (`date,open,close`) for crash labelling; a
    /// price-weighted proxy of the panel when absent.
    pub index: Option<PathBuf>,
    /// Pre-labelled events (`date,daily_return,intraday_return`); skips
    /// labelling when given.
    pub events: Option<PathBuf>,
    pub window_minutes: u32,
    pub step_minutes: u32,
    pub crash_threshold: f64,
    /// `daily` or `intraday`.
    pub crash_basis: String,
    pub slope_window_days: usize,
}

impl Default for PrecursorConfig {
    fn default() -> Self {
        let s = SlidingConfig::default();
        PrecursorConfig {
            series: None,
            index: None,
            events: None,
            window_minutes: s.window_minutes,
            step_minutes: s.step_minutes,
            crash_threshold: DEFAULT_CRASH_THRESHOLD,
            crash_basis: "daily".into(),
            slope_window_days: DEFAULT_SLOPE_WINDOW_DAYS,
        }
    }
}

impl PrecursorConfig {
    pub fn basis(&self) -> Result<CrashBasis, CliError> {
        match self.crash_basis.as_str() {
            "daily" => Ok(CrashBasis::Daily),
            "intraday" => Ok(CrashBasis::Intraday),
            other => Err(CliError::Config(format!(
                "precursor.crash_basis must be \"daily\" or \"intraday\", got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelogramConfig {
    pub series: Option<PathBuf>,
    pub column: Option<String>,
    /// Second series of `ccf`.
    pub other: Option<PathBuf>,
    pub other_column: Option<String>,
    pub max_lag: usize,
}

impl Default for CorrelogramConfig {
    fn default() -> Self {
        CorrelogramConfig {
            series: None,
            column: None,
            other: None,
            other_column: None,
            max_lag: 20,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Checks that do not need any input data.
    pub fn validate(&self) -> Result<(), CliError> {
        self.grid.spec()?;
        self.mrw.weighting()?;
        self.precursor.basis()?;
        if self.returns.delta_t == 0 || self.returns.fine_delta_t == 0 {
            return Err(CliError::Config("returns: delta_t must be positive".into()));
        }
        Ok(())
    }

    pub fn sliding(&self) -> SlidingConfig {
        SlidingConfig {
            window_minutes: self.precursor.window_minutes,
            step_minutes: self.precursor.step_minutes,
            delta_t: self.returns.delta_t,
            fit: self.mrw.fit_range(),
            max_lag: self.mrw.max_lag,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_round_trips() {
        let mut c = RunConfig::default();
        c.input.files = vec!["a.csv".into(), "b.csv".into()];
        c.mrw.fit_hi = Some(300);
        c.precursor.crash_threshold = -0.07;
        c.simulate.lambda2 = 0.1 + 0.2;
        let text = c.canonical();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.canonical(), text);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = RunConfig::parse("seed = 7\n[grid]\nskip_open_minutes = 0\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.grid.skip_open_minutes, 0);
        assert_eq!(c.grid.sessions, "09:00-11:00,12:30-15:00");
        assert_eq!(c.returns.delta_t, 5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::parse("[grid]\nsesions = \"x\"\n"), Err(CliError::Config(_))));
    }
}
