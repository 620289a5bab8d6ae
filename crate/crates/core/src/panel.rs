//! Minute-bar ingestion, intraday grid alignment, log-returns and removal
//! of the time-of-day volatility pattern.
//!
//! Prices live on a per-day grid of session minutes. A symbol that never
//! trades on a given day is excluded from that day: its cells hold NaN,
//! which downstream windowing treats as "absent". Within a day, missing
//! minutes are forward-filled from the last observed price.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::ops::Range;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::par_map;
use crate::stats;
use crate::time::{format_minute, parse_date, parse_minute, Stamp};

/// One observed price.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceBar {
    pub stamp: Stamp,
    pub symbol: String,
    pub price: f64,
}

/// Intraday session definition: half-open `[open, close)` minute ranges plus
/// the number of minutes dropped after the first open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub sessions: Vec<(u32, u32)>,
    pub skip_open_minutes: u32,
}

impl Default for GridSpec {
    /// Tokyo Stock Exchange continuous auction hours.
    fn default() -> Self {
        GridSpec {
            sessions: vec![(9 * 60, 11 * 60), (12 * 60 + 30, 15 * 60)],
            skip_open_minutes: 30,
        }
    }
}

impl GridSpec {
    /// Parse `"09:00-11:00,12:30-15:00"`.
    pub fn parse_sessions(s: &str, skip_open_minutes: u32) -> Result<Self> {
        let mut sessions = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (a, b) = part
                .split_once('-')
                .ok_or_else(|| Error::invalid(format!("session {part:?} is not HH:MM-HH:MM")))?;
            sessions.push((parse_minute(a)?, parse_minute(b)?));
        }
        let spec = GridSpec {
            sessions,
            skip_open_minutes,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sessions_string(&self) -> String {
        self.sessions
            .iter()
            .map(|&(a, b)| format!("{}-{}", format_minute(a), format_minute(b)))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn validate(&self) -> Result<()> {
        if self.sessions.is_empty() {
            return Err(Error::invalid("grid has no sessions"));
        }
        let mut prev_close = 0;
        for &(open, close) in &self.sessions {
            if open >= close || open < prev_close {
                return Err(Error::invalid(format!(
                    "sessions must be increasing and non-overlapping (got {})",
                    self.sessions_string()
                )));
            }
            prev_close = close;
        }
        if self.minutes().len() < 2 {
            return Err(Error::invalid("opening trim leaves fewer than two grid minutes"));
        }
        Ok(())
    }

    /// Grid minutes after the opening trim.
    pub fn minutes(&self) -> Vec<u32> {
        self.sessions
            .iter()
            .flat_map(|&(a, b)| a..b)
            .skip(self.skip_open_minutes as usize)
            .collect()
    }
}

/// Aligned prices: N symbols by T grid columns, days laid end to end.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    pub symbols: Vec<String>,
    pub trading_days: Vec<NaiveDate>,
    /// Grid minutes of each day; column count is the sum of their lengths.
    pub day_minutes: Vec<Vec<u32>>,
    /// NaN marks a symbol excluded from that day.
    pub grid: DMatrix<f64>,
}

impl PricePanel {
    pub fn n_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn n_columns(&self) -> usize {
        self.grid.ncols()
    }

    pub fn minutes_per_day(&self) -> Vec<usize> {
        self.day_minutes.iter().map(Vec::len).collect()
    }

    pub fn day_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.day_minutes
            .iter()
            .map(|m| {
                let r = start..start + m.len();
                start = r.end;
                r
            })
            .collect()
    }

    pub fn stamps(&self) -> Vec<Stamp> {
        self.trading_days
            .iter()
            .zip(&self.day_minutes)
            .flat_map(|(&d, ms)| ms.iter().map(move |&m| Stamp::new(d, m)))
            .collect()
    }

    /// Open and close of a price-weighted average of the constituents present
    /// on each day, as `(date, open, close)`.
    pub fn proxy_index(&self) -> Vec<(NaiveDate, f64, f64)> {
        self.day_ranges()
            .into_iter()
            .zip(&self.trading_days)
            .map(|(r, &d)| {
                let avg = |col: usize| {
                    let col = self.grid.column(col);
                    let present: Vec<f64> = col.iter().copied().filter(|p| p.is_finite()).collect();
                    stats::mean(&present)
                };
                (d, avg(r.start), avg(r.end - 1))
            })
            .collect()
    }
}

/// Result of panel construction together with the warnings it raised.
#[derive(Debug, Clone)]
pub struct Ingest {
    pub panel: PricePanel,
    pub warnings: Vec<String>,
}

struct RawBar {
    date: NaiveDate,
    minute: u32,
    price: f64,
    line: u64,
}

/// Parse one bar file (`date,time,symbol,price`, header required).
pub fn read_bars<R: Read>(reader: R, path: &Path) -> Result<Vec<PriceBar>> {
    Ok(read_raw(reader, path)?
        .into_iter()
        .map(|(sym, b)| PriceBar {
            stamp: Stamp::new(b.date, b.minute),
            symbol: sym,
            price: b.price,
        })
        .collect())
}

fn read_raw<R: Read>(reader: R, path: &Path) -> Result<Vec<(String, RawBar)>> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| parse_err(1, format!("missing column {name:?}")))
    };
    let (ci_date, ci_time, ci_sym, ci_price) = (col("date")?, col("time")?, col("symbol")?, col("price")?);

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let date = parse_date(field(ci_date)).map_err(|e| parse_err(line, e.to_string()))?;
        let minute = parse_minute(field(ci_time)).map_err(|e| parse_err(line, e.to_string()))?;
        let price: f64 = field(ci_price)
            .parse()
            .map_err(|_| parse_err(line, format!("bad price {:?}", field(ci_price))))?;
        if !(price.is_finite() && price > 0.0) {
            return Err(parse_err(line, format!("price must be positive, got {price}")));
        }
        let sym = field(ci_sym).to_string();
        if sym.is_empty() {
            return Err(parse_err(line, "empty symbol".into()));
        }
        out.push((
            sym,
            RawBar {
                date,
                minute,
                price,
                line,
            },
        ));
    }
    Ok(out)
}

/// Load bar files and align the listed symbols on the session grid.
pub fn load_panel<P: AsRef<Path>>(files: &[P], symbol_list: &[String], grid: &GridSpec) -> Result<Ingest> {
    if symbol_list.is_empty() {
        return Err(Error::invalid("symbol list is empty"));
    }
    grid.validate()?;
    let wanted: BTreeSet<&str> = symbol_list.iter().map(String::as_str).collect();
    // symbol -> date -> bars, remembering the file for duplicate diagnostics
    let mut by_symbol: HashMap<String, BTreeMap<NaiveDate, Vec<(RawBar, usize)>>> = HashMap::new();
    let paths: Vec<PathBuf> = files.iter().map(|p| p.as_ref().to_path_buf()).collect();
    for (fi, path) in paths.iter().enumerate() {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        for (sym, bar) in read_raw(std::io::BufReader::new(file), path)? {
            if !wanted.contains(sym.as_str()) {
                continue;
            }
            by_symbol
                .entry(sym)
                .or_default()
                .entry(bar.date)
                .or_default()
                .push((bar, fi));
        }
    }

    let mut warnings = Vec::new();
    let mut days_by_symbol: Vec<(String, BTreeMap<NaiveDate, Vec<(u32, f64)>>)> = Vec::new();
    for sym in symbol_list {
        let Some(days) = by_symbol.remove(sym) else {
            warnings.push(format!("symbol {sym} has no bars; dropped"));
            continue;
        };
        let mut clean = BTreeMap::new();
        for (date, mut bars) in days {
            bars.sort_by_key(|(b, _)| b.minute);
            for w in bars.windows(2) {
                if w[0].0.minute == w[1].0.minute {
                    let (dup, fi) = &w[1];
                    return Err(Error::Parse {
                        path: paths[*fi].clone(),
                        line: dup.line,
                        message: format!("duplicate bar for {sym} at {date} {}", format_minute(dup.minute)),
                    });
                }
            }
            clean.insert(date, bars.into_iter().map(|(b, _)| (b.minute, b.price)).collect());
        }
        days_by_symbol.push((sym.clone(), clean));
    }
    if days_by_symbol.is_empty() {
        return Err(Error::invalid("none of the listed symbols appear in the input"));
    }
    let mut ingest = align(days_by_symbol, grid)?;
    warnings.append(&mut ingest.warnings);
    ingest.warnings = warnings;
    for w in &ingest.warnings {
        warn!("{w}");
    }
    Ok(ingest)
}

/// Align in-memory bars. Bars for symbols outside `symbol_list` are ignored.
pub fn panel_from_bars(bars: &[PriceBar], symbol_list: &[String], grid: &GridSpec) -> Result<Ingest> {
    grid.validate()?;
    let mut map: BTreeMap<&str, BTreeMap<NaiveDate, Vec<(u32, f64)>>> = BTreeMap::new();
    for b in bars {
        if symbol_list.contains(&b.symbol) {
            if !(b.price.is_finite() && b.price > 0.0) {
                return Err(Error::invalid(format!("non-positive price for {} at {}", b.symbol, b.stamp)));
            }
            map.entry(b.symbol.as_str())
                .or_default()
                .entry(b.stamp.date)
                .or_default()
                .push((b.stamp.minute, b.price));
        }
    }
    let mut warnings = Vec::new();
    let mut days_by_symbol = Vec::new();
    for sym in symbol_list {
        match map.remove(sym.as_str()) {
            Some(mut days) => {
                for (date, v) in days.iter_mut() {
                    v.sort_by_key(|x| x.0);
                    if v.windows(2).any(|w| w[0].0 == w[1].0) {
                        return Err(Error::invalid(format!("duplicate bar for {sym} on {date}")));
                    }
                }
                days_by_symbol.push((sym.clone(), days));
            }
            None => warnings.push(format!("symbol {sym} has no bars; dropped")),
        }
    }
    if days_by_symbol.is_empty() {
        return Err(Error::invalid("none of the listed symbols appear in the input"));
    }
    let mut ingest = align(days_by_symbol, grid)?;
    warnings.append(&mut ingest.warnings);
    ingest.warnings = warnings;
    Ok(ingest)
}

type SymbolDays = (String, BTreeMap<NaiveDate, Vec<(u32, f64)>>);

fn align(days_by_symbol: Vec<SymbolDays>, grid: &GridSpec) -> Result<Ingest> {
    let grid_minutes = grid.minutes();
    let last_grid = *grid_minutes.last().expect("validated grid");
    let mut warnings = Vec::new();

    // Only bars up to the end of the session count as "traded that day".
    let usable = |bars: &[(u32, f64)]| -> usize { bars.partition_point(|&(m, _)| m <= last_grid) };

    let mut intersection: Option<BTreeSet<NaiveDate>> = None;
    let mut union = BTreeSet::new();
    for (_, days) in &days_by_symbol {
        let traded: BTreeSet<NaiveDate> = days
            .iter()
            .filter(|(_, bars)| usable(bars) > 0)
            .map(|(d, _)| *d)
            .collect();
        union.extend(traded.iter().copied());
        intersection = Some(match intersection {
            None => traded,
            Some(acc) => acc.intersection(&traded).copied().collect(),
        });
    }
    if intersection.map_or(true, |s| s.is_empty()) {
        return Err(Error::EmptyDateIntersection);
    }

    let n = days_by_symbol.len();
    let mut trading_days = Vec::new();
    let mut day_minutes = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();

    for date in union {
        let present: Vec<(usize, &[(u32, f64)])> = days_by_symbol
            .iter()
            .enumerate()
            .filter_map(|(i, (_, days))| {
                let bars = days.get(&date)?;
                let k = usable(bars);
                (k > 0).then(|| (i, &bars[..k]))
            })
            .collect();
        // Start once every present symbol has printed; stop at the last print.
        let start = present.iter().map(|(_, b)| b[0].0).max().unwrap_or(0);
        let end = present.iter().map(|(_, b)| b[b.len() - 1].0).max().unwrap_or(0);
        let minutes: Vec<u32> = grid_minutes
            .iter()
            .copied()
            .filter(|&m| m >= start && m <= end)
            .collect();
        if minutes.len() < 2 {
            warnings.push(format!("{date}: fewer than two common grid minutes; day dropped"));
            continue;
        }
        let mut day_cols = vec![vec![f64::NAN; n]; minutes.len()];
        for &(i, bars) in &present {
            let mut fills = 0usize;
            let mut k = 0usize;
            let mut last = None;
            for (c, &m) in minutes.iter().enumerate() {
                while k < bars.len() && bars[k].0 <= m {
                    last = Some(bars[k]);
                    k += 1;
                }
                let (bm, price) = last.expect("start is after every first print");
                if bm != m {
                    fills += 1;
                }
                day_cols[c][i] = price;
            }
            if fills > 0 {
                warnings.push(format!(
                    "{date}: {} forward-filled {fills} grid minute(s)",
                    days_by_symbol[i].0
                ));
            }
        }
        for (i, (sym, _)) in days_by_symbol.iter().enumerate() {
            if !present.iter().any(|&(j, _)| j == i) {
                warnings.push(format!("{date}: {sym} recorded no price; excluded for the day"));
            }
        }
        trading_days.push(date);
        day_minutes.push(minutes);
        columns.extend(day_cols);
    }

    let t = columns.len();
    let grid_matrix = DMatrix::from_fn(n, t, |i, j| columns[j][i]);
    Ok(Ingest {
        panel: PricePanel {
            symbols: days_by_symbol.into_iter().map(|(s, _)| s).collect(),
            trading_days,
            day_minutes,
            grid: grid_matrix,
        },
        warnings,
    })
}

/// Returns (raw or de-seasonalized), one column per return, never spanning a
/// day boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub symbols: Vec<String>,
    pub trading_days: Vec<NaiveDate>,
    /// Timestamp of the end of each return interval.
    pub stamps: Vec<Stamp>,
    /// Index into `trading_days` for each column.
    pub day_of_column: Vec<usize>,
    pub values: DMatrix<f64>,
    /// Sampling interval in grid minutes.
    pub delta_t: u32,
}

impl ReturnPanel {
    pub fn n_symbols(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_columns(&self) -> usize {
        self.values.ncols()
    }

    /// Column range of every trading day (possibly empty).
    pub fn day_ranges(&self) -> Vec<Range<usize>> {
        let mut out = vec![0..0; self.trading_days.len()];
        let mut start = 0;
        while start < self.day_of_column.len() {
            let d = self.day_of_column[start];
            let mut end = start;
            while end < self.day_of_column.len() && self.day_of_column[end] == d {
                end += 1;
            }
            out[d] = start..end;
            start = end;
        }
        out
    }

    /// Keep only the given columns.
    pub fn select_columns(&self, range: Range<usize>) -> ReturnPanel {
        ReturnPanel {
            symbols: self.symbols.clone(),
            trading_days: self.trading_days.clone(),
            stamps: self.stamps[range.clone()].to_vec(),
            day_of_column: self.day_of_column[range.clone()].to_vec(),
            values: self.values.columns(range.start, range.len()).into_owned(),
            delta_t: self.delta_t,
        }
    }
}

/// Non-overlapping log-returns `log P(t) - log P(t - delta_t)` within each day,
/// sampled every `delta_t` grid steps starting from the day's first grid minute.
pub fn log_returns(panel: &PricePanel, delta_t: u32) -> Result<ReturnPanel> {
    if delta_t == 0 {
        return Err(Error::invalid("delta_t must be positive"));
    }
    let longest = panel.day_minutes.iter().map(Vec::len).max().unwrap_or(0);
    if delta_t as usize >= longest {
        return Err(Error::invalid(format!(
            "delta_t = {delta_t} exceeds the longest session ({longest} grid minutes)"
        )));
    }
    let dt = delta_t as usize;
    let mut stamps = Vec::new();
    let mut day_of_column = Vec::new();
    let mut cols: Vec<(usize, usize)> = Vec::new();
    for (d, (range, minutes)) in panel.day_ranges().into_iter().zip(&panel.day_minutes).enumerate() {
        let mut j = dt;
        while j < range.len() {
            cols.push((range.start + j - dt, range.start + j));
            stamps.push(Stamp::new(panel.trading_days[d], minutes[j]));
            day_of_column.push(d);
            j += dt;
        }
    }
    let values = DMatrix::from_fn(panel.n_symbols(), cols.len(), |i, c| {
        let (a, b) = cols[c];
        panel.grid[(i, b)].ln() - panel.grid[(i, a)].ln()
    });
    Ok(ReturnPanel {
        symbols: panel.symbols.clone(),
        trading_days: panel.trading_days.clone(),
        stamps,
        day_of_column,
        values,
        delta_t,
    })
}

/// Per-symbol standard deviation of returns by time-of-day slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalProfile {
    /// Minute-of-day of each slot, ascending.
    pub slots: Vec<u32>,
    /// `std[symbol][slot]`, all strictly positive.
    pub std: Vec<Vec<f64>>,
}

impl SeasonalProfile {
    pub fn slot_index(&self, minute: u32) -> Option<usize> {
        self.slots.binary_search(&minute).ok()
    }
}

#[derive(Debug, Clone)]
pub struct ProfileBuild {
    pub profile: SeasonalProfile,
    pub warnings: Vec<String>,
}

/// Slot-wise sample std over all days. Slots with fewer than two
/// observations or zero spread fall back to the symbol's overall std.
pub fn build_seasonal_profile(returns: &ReturnPanel) -> Result<ProfileBuild> {
    let slots: Vec<u32> = returns
        .stamps
        .iter()
        .map(|s| s.minute)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let slot_of: Vec<usize> = returns
        .stamps
        .iter()
        .map(|s| slots.binary_search(&s.minute).expect("slot collected above"))
        .collect();
    let rows: Vec<usize> = (0..returns.n_symbols()).collect();
    let per_symbol = par_map(&rows, |&i| {
        let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); slots.len()];
        let mut all = Vec::new();
        for (c, &slot) in slot_of.iter().enumerate() {
            let v = returns.values[(i, c)];
            if v.is_finite() {
                buckets[slot].push(v);
                all.push(v);
            }
        }
        let global = stats::sample_std(&all);
        let mut warnings = Vec::new();
        let fallback = if global.is_finite() && global > 0.0 {
            global
        } else {
            warnings.push(format!(
                "{}: no return variation at all; profile set to 1",
                returns.symbols[i]
            ));
            1.0
        };
        let mut degenerate = Vec::new();
        let std: Vec<f64> = buckets
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let s = stats::sample_std(b);
                if s.is_finite() && s > 0.0 {
                    s
                } else {
                    degenerate.push(format_minute(slots[k]));
                    fallback
                }
            })
            .collect();
        if !degenerate.is_empty() && fallback == global {
            warnings.push(format!(
                "{}: {} degenerate time-of-day slot(s) ({}) replaced by overall std",
                returns.symbols[i],
                degenerate.len(),
                degenerate.join(" ")
            ));
        }
        (std, warnings)
    });
    let mut std = Vec::with_capacity(per_symbol.len());
    let mut warnings = Vec::new();
    for (s, mut w) in per_symbol {
        std.push(s);
        warnings.append(&mut w);
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(ProfileBuild {
        profile: SeasonalProfile { slots, std },
        warnings,
    })
}

/// Divide every return by its symbol's time-of-day std.
pub fn deseasonalize(returns: &ReturnPanel, profile: &SeasonalProfile) -> Result<ReturnPanel> {
    if profile.std.len() != returns.n_symbols() {
        return Err(Error::invalid(format!(
            "profile has {} symbols, returns have {}",
            profile.std.len(),
            returns.n_symbols()
        )));
    }
    let slot_of = returns
        .stamps
        .iter()
        .map(|s| {
            profile
                .slot_index(s.minute)
                .ok_or_else(|| Error::invalid(format!("no profile slot for {}", s.time_string())))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = returns.clone();
    for (c, &slot) in slot_of.iter().enumerate() {
        for i in 0..returns.n_symbols() {
            out.values[(i, c)] /= profile.std[i][slot];
        }
    }
    Ok(out)
}
