//! Sliding-window log-volatility variance of the market mode, crash-day
//! labelling and the test of whether crashes sit on rising stretches of the
//! indicator.

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::comovement::MarketModeSeries;
use crate::error::{Error, Result};
use crate::mrw::{estimate_params, log_abs_cov, FitRange};
use crate::parallel::par_map;
use crate::stats::linear_fit;
use crate::time::Stamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlidingConfig {
    /// Window width in minutes.
    pub window_minutes: u32,
    /// Advance between windows in minutes.
    pub step_minutes: u32,
    /// Sampling interval of the input series in minutes.
    pub delta_t: u32,
    pub fit: FitRange,
    /// Largest covariance lag computed per window; defaults to a quarter of
    /// the window length in samples.
    pub max_lag: Option<usize>,
}

impl Default for SlidingConfig {
    fn default() -> Self {
        SlidingConfig {
            window_minutes: 20_000,
            step_minutes: 242,
            delta_t: 5,
            fit: FitRange::default(),
            max_lag: None,
        }
    }
}

impl SlidingConfig {
    pub fn window_samples(&self) -> usize {
        (self.window_minutes / self.delta_t.max(1)) as usize
    }

    pub fn effective_max_lag(&self) -> usize {
        self.max_lag.unwrap_or((self.window_samples().saturating_sub(1)) / 4)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta_t == 0 || self.step_minutes == 0 {
            return Err(Error::invalid("delta_t and step must be positive"));
        }
        if self.step_minutes > self.window_minutes {
            return Err(Error::invalid("step must not exceed the window width"));
        }
        let w = self.window_samples();
        let max_lag = self.effective_max_lag();
        if max_lag == 0 || w <= 4 * max_lag {
            return Err(Error::invalid(format!(
                "window of {w} samples is too short for covariance lags up to {max_lag}"
            )));
        }
        if let Some(hi) = self.fit.hi {
            if hi > max_lag {
                return Err(Error::invalid(format!(
                    "fit range ends at lag {hi} beyond the computed {max_lag}"
                )));
            }
        }
        Ok(())
    }

    /// Number of windows over `n` samples.
    pub fn window_count(&self, n: usize) -> usize {
        let total = n as u64 * self.delta_t as u64;
        let width = self.window_minutes as u64;
        if total < width {
            0
        } else {
            ((total - width) / self.step_minutes as u64 + 1) as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorPoint {
    pub window_end: Stamp,
    /// Index of the last sample in the window.
    pub end_index: usize,
    pub var_omega: Option<f64>,
    pub lambda2: Option<f64>,
    pub l_over_dt: Option<f64>,
    pub r2: Option<f64>,
    /// Why the window has no estimate.
    pub failure: Option<String>,
}

impl IndicatorPoint {
    pub fn is_valid(&self) -> bool {
        self.var_omega.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSeries {
    pub points: Vec<IndicatorPoint>,
    pub config: SlidingConfig,
}

impl IndicatorSeries {
    pub fn valid_count(&self) -> usize {
        self.points.iter().filter(|p| p.is_valid()).count()
    }

    /// Values for plotting, with failed windows linearly interpolated between
    /// their valid neighbours (held flat at the ends). The flag marks filled
    /// points. Returns `None` when no window is valid.
    pub fn plot_values(&self) -> Option<Vec<(f64, bool)>> {
        let valid: Vec<(usize, f64)> = self
            .points
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.var_omega.map(|v| (i, v)))
            .collect();
        if valid.is_empty() {
            return None;
        }
        let mut out = Vec::with_capacity(self.points.len());
        let mut next = 0usize;
        for (i, p) in self.points.iter().enumerate() {
            if let Some(v) = p.var_omega {
                out.push((v, false));
                continue;
            }
            while next < valid.len() && valid[next].0 < i {
                next += 1;
            }
            let v = match (next.checked_sub(1).map(|k| valid[k]), valid.get(next)) {
                (Some((i0, v0)), Some(&(i1, v1))) => v0 + (v1 - v0) * (i - i0) as f64 / (i1 - i0) as f64,
                (Some((_, v0)), None) => v0,
                (None, Some(&(_, v1))) => v1,
                (None, None) => unreachable!("valid is non-empty"),
            };
            out.push((v, true));
        }
        Some(out)
    }
}

/// MRW fit in every window `[t - width, t]` of the market-mode series.
pub fn sliding_indicator(series: &MarketModeSeries, cfg: &SlidingConfig) -> Result<IndicatorSeries> {
    cfg.validate()?;
    if series.delta_t != cfg.delta_t {
        return Err(Error::invalid(format!(
            "series is sampled every {} min but the window config expects {}",
            series.delta_t, cfg.delta_t
        )));
    }
    let n = series.len();
    let w = cfg.window_samples();
    let count = cfg.window_count(n);
    if count == 0 {
        return Err(Error::TooFewPoints { needed: w, got: n });
    }
    let max_lag = cfg.effective_max_lag();
    let starts: Vec<usize> = (0..count)
        .map(|j| (j as u64 * cfg.step_minutes as u64 / cfg.delta_t as u64) as usize)
        .collect();
    let points = par_map(&starts, |&s| {
        let window = &series.values[s..s + w];
        let end = s + w - 1;
        let fit = log_abs_cov(window, max_lag).and_then(|c| estimate_params(&c, cfg.fit));
        match fit {
            Ok(f) => IndicatorPoint {
                window_end: series.stamps[end],
                end_index: end,
                var_omega: Some(f.var_omega()),
                lambda2: Some(f.lambda2),
                l_over_dt: Some(f.l_over_dt),
                r2: Some(f.r2),
                failure: None,
            },
            Err(e) => IndicatorPoint {
                window_end: series.stamps[end],
                end_index: end,
                var_omega: None,
                lambda2: None,
                l_over_dt: None,
                r2: None,
                failure: Some(e.to_string()),
            },
        }
    });
    let out = IndicatorSeries { points, config: *cfg };
    if out.valid_count() == 0 {
        return Err(Error::AllWindowsFailed {
            windows: out.points.len(),
            first: out.points[0].failure.clone().unwrap_or_default(),
        });
    }
    Ok(out)
}

/// One trading day of an index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyBar {
    pub date: NaiveDate,
    pub open: f64,
    pub close: f64,
    pub prev_close: Option<f64>,
}

/// Chain `(date, open, close)` rows so each day knows the previous close.
pub fn chain_daily(rows: &[(NaiveDate, f64, f64)]) -> Vec<DailyBar> {
    rows.iter()
        .enumerate()
        .map(|(i, &(date, open, close))| DailyBar {
            date,
            open,
            close,
            prev_close: i.checked_sub(1).map(|j| rows[j].2),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelSource {
    Computed,
    Provided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrashEvent {
    pub date: NaiveDate,
    /// `ln(close / prev_close)`; NaN when the previous close is unknown.
    pub daily_return: f64,
    /// `ln(close / open)`.
    pub intraday_return: f64,
    pub source: LabelSource,
}

/// Which return the crash threshold applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CrashBasis {
    /// Overnight plus intraday (close to previous close).
    #[default]
    Daily,
    /// Open to close.
    Intraday,
}

pub const DEFAULT_CRASH_THRESHOLD: f64 = -0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Labelling {
    /// Sorted by ascending return on the chosen basis.
    pub events: Vec<CrashEvent>,
    pub warnings: Vec<String>,
}

/// Days whose log-return falls below `threshold`.
pub fn label_crashes(rows: &[DailyBar], threshold: f64, basis: CrashBasis) -> Labelling {
    let mut events = Vec::new();
    let mut warnings = Vec::new();
    for r in rows {
        let intraday = (r.close / r.open).ln();
        let daily = r.prev_close.map(|p| (r.close / p).ln());
        let key = match basis {
            CrashBasis::Daily => match daily {
                Some(d) => d,
                None => {
                    warnings.push(format!("{}: no previous close; row skipped", r.date));
                    continue;
                }
            },
            CrashBasis::Intraday => intraday,
        };
        if key < threshold {
            events.push(CrashEvent {
                date: r.date,
                daily_return: daily.unwrap_or(f64::NAN),
                intraday_return: intraday,
                source: LabelSource::Computed,
            });
        }
    }
    let key = |e: &CrashEvent| match basis {
        CrashBasis::Daily => e.daily_return,
        CrashBasis::Intraday => e.intraday_return,
    };
    events.sort_by(|a, b| key(a).total_cmp(&key(b)).then(a.date.cmp(&b.date)));
    for w in &warnings {
        warn!("{w}");
    }
    Labelling { events, warnings }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventAlignment {
    pub date: NaiveDate,
    /// Least-squares slope of the indicator per window step.
    pub slope: f64,
    pub ascending: bool,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub events: Vec<EventAlignment>,
    pub excluded: Vec<(NaiveDate, String)>,
    pub slope_window_days: usize,
}

impl AlignmentReport {
    /// Share of aligned events on a rising indicator; `None` when no event
    /// could be aligned.
    pub fn fraction_ascending(&self) -> Option<f64> {
        if self.events.is_empty() {
            return None;
        }
        Some(self.events.iter().filter(|e| e.ascending).count() as f64 / self.events.len() as f64)
    }
}

pub const DEFAULT_SLOPE_WINDOW_DAYS: usize = 10;

/// Sign of the least-squares slope of the indicator over the last
/// `slope_window_days` trading days up to and including each event date.
pub fn align_events(indicator: &IndicatorSeries, events: &[CrashEvent], slope_window_days: usize) -> Result<AlignmentReport> {
    if slope_window_days < 1 {
        return Err(Error::invalid("slope window must cover at least one day"));
    }
    let mut days: Vec<NaiveDate> = indicator.points.iter().map(|p| p.window_end.date).collect();
    days.dedup();
    let (Some(&first), Some(&last)) = (days.first(), days.last()) else {
        return Err(Error::invalid("indicator is empty"));
    };
    let mut out = Vec::new();
    let mut excluded = Vec::new();
    for ev in events {
        if ev.date < first || ev.date > last {
            excluded.push((ev.date, "outside the indicator span".to_string()));
            continue;
        }
        let upto = days.partition_point(|&d| d <= ev.date);
        let from = days[upto.saturating_sub(slope_window_days)];
        let (x, y): (Vec<f64>, Vec<f64>) = indicator
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.window_end.date >= from && p.window_end.date <= ev.date)
            .filter_map(|(i, p)| p.var_omega.map(|v| (i as f64, v)))
            .unzip();
        match linear_fit(&x, &y) {
            Ok(fit) => out.push(EventAlignment {
                date: ev.date,
                slope: fit.slope,
                ascending: fit.slope > 0.0,
                n_points: x.len(),
            }),
            Err(_) => excluded.push((ev.date, format!("only {} valid indicator point(s) in the slope window", x.len()))),
        }
    }
    for (d, why) in &excluded {
        warn!("event {d}: {why}");
    }
    Ok(AlignmentReport {
        events: out,
        excluded,
        slope_window_days,
    })
}
