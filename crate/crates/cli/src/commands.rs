use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use chrono::NaiveDate;
use marketmode::comovement::{market_mode_panel, rolling_eigenvalues, CorrelationSnapshot, MarketModeSeries, Scheme};
use marketmode::correlogram::{acf, ccf, Correlogram};
use marketmode::mrw::{estimate_params, log_abs_cov, simulate};
use marketmode::panel::{build_seasonal_profile, deseasonalize, load_panel, log_returns, PricePanel, ReturnPanel};
use marketmode::precursor::{align_events, chain_daily, label_crashes, sliding_indicator, AlignmentReport, CrashEvent};
use marketmode::time::synthetic_stamps;

use crate::config::RunConfig;
use crate::io::{self, num, opt, OutDir};
use crate::{CliError, Task};

/// Minutes per synthetic trading day when a series file carries no stamps.
const SYNTHETIC_DAY_MINUTES: u32 = 242;

pub fn dispatch(cfg: &RunConfig, task: Task) -> Result<String, CliError> {
    cfg.validate()?;
    let mut out = OutDir::create(&cfg.out_dir)?;
    let result = match task {
        Task::Ingest => ingest(cfg, &mut out),
        Task::Eigen => eigen(cfg, &mut out),
        Task::Simulate => simulate_path(cfg, &mut out),
        Task::MrwFit => mrw_fit(cfg, &mut out),
        Task::Precursor => precursor(cfg, &mut out),
        Task::Acf => acf_cmd(cfg, &mut out),
        Task::Ccf => ccf_cmd(cfg, &mut out),
    };
    let failure = result.as_ref().err().map(ToString::to_string);
    out.finish(task.name(), cfg, failure.as_deref())?;
    result.map(|s| format!("{}: {s} ({} warnings) -> {}", task.name(), out.warnings.len(), cfg.out_dir.display()))
}

fn load(cfg: &RunConfig, out: &mut OutDir) -> Result<PricePanel, CliError> {
    if cfg.input.files.is_empty() {
        return Err(CliError::Config("no bar files (set input.files or pass --input)".into()));
    }
    let grid = cfg.grid.spec()?;
    let symbols = match &cfg.input.symbols {
        Some(p) => io::read_symbols(p)?,
        None => {
            let mut all = std::collections::BTreeSet::new();
            for f in &cfg.input.files {
                let file = std::fs::File::open(f).map_err(|source| CliError::Io {
                    path: f.clone(),
                    source,
                })?;
                for b in marketmode::panel::read_bars(std::io::BufReader::new(file), f)? {
                    all.insert(b.symbol);
                }
            }
            all.into_iter().collect()
        }
    };
    let ingest = load_panel(&cfg.input.files, &symbols, &grid)?;
    out.extend_warnings(ingest.warnings);
    Ok(ingest.panel)
}

fn normalized_returns(panel: &PricePanel, delta_t: u32, out: &mut OutDir) -> Result<ReturnPanel, CliError> {
    let returns = log_returns(panel, delta_t)?;
    let build = build_seasonal_profile(&returns)?;
    out.extend_warnings(build.warnings);
    Ok(deseasonalize(&returns, &build.profile)?)
}

fn ingest(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    let panel = load(cfg, out)?;
    let returns = log_returns(&panel, cfg.returns.delta_t)?;

    let mut prices = String::from("date,time,symbol,price\n");
    for (j, stamp) in panel.stamps().iter().enumerate() {
        for (i, sym) in panel.symbols.iter().enumerate() {
            let p = panel.grid[(i, j)];
            if p.is_finite() {
                let _ = writeln!(prices, "{},{},{sym},{}", stamp.date, stamp.time_string(), num(p));
            }
        }
    }
    out.write("prices.csv", &prices)?;

    let mut rets = String::from("date,time,symbol,log_return\n");
    for (j, stamp) in returns.stamps.iter().enumerate() {
        for (i, sym) in returns.symbols.iter().enumerate() {
            let r = returns.values[(i, j)];
            if r.is_finite() {
                let _ = writeln!(rets, "{},{},{sym},{}", stamp.date, stamp.time_string(), num(r));
            }
        }
    }
    out.write("returns.csv", &rets)?;
    Ok(format!(
        "{} symbols, {} days, {} returns per symbol at {} min",
        panel.n_symbols(),
        panel.trading_days.len(),
        returns.n_columns(),
        cfg.returns.delta_t
    ))
}

fn snapshot_csv(snaps: &[CorrelationSnapshot]) -> String {
    let mut s = String::from("window_start,window_end,n_symbols,max_eigenvalue\n");
    for snap in snaps {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            snap.window_start,
            snap.window_end,
            snap.n_symbols(),
            num(snap.max_eigenvalue)
        );
    }
    s
}

fn weights_csv(snap: &CorrelationSnapshot) -> String {
    let mut s = String::from("symbol,weight\n");
    for (sym, w) in snap.symbols.iter().zip(&snap.market_mode_weights) {
        let _ = writeln!(s, "{sym},{}", num(*w));
    }
    s
}

fn correlogram_csv(c: &Correlogram) -> String {
    let mut s = String::from("lag,value,band\n");
    for (lag, v) in c.lags.iter().zip(&c.values) {
        let _ = writeln!(s, "{lag},{},{}", num(*v), num(c.band));
    }
    s
}

fn daily_rows(cfg: &RunConfig, panel: Option<&PricePanel>) -> Result<Option<Vec<(NaiveDate, f64, f64)>>, CliError> {
    match (&cfg.precursor.index, panel) {
        (Some(p), _) => Ok(Some(io::read_index(p)?)),
        (None, Some(panel)) => Ok(Some(panel.proxy_index())),
        (None, None) => Ok(None),
    }
}

fn eigen(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    let panel = load(cfg, out)?;

    let fine = normalized_returns(&panel, cfg.returns.fine_delta_t, out)?;
    let per_day = rolling_eigenvalues(&fine, Scheme::PerDay)?;
    out.write("eigen_per_day.csv", &snapshot_csv(&per_day))?;

    let coarse = normalized_returns(&panel, cfg.returns.delta_t, out)?;
    let scheme = Scheme::Sliding {
        width_days: cfg.eigen.sliding_width_days,
        step_days: cfg.eigen.sliding_step_days,
    };
    let sliding = rolling_eigenvalues(&coarse, scheme)?;
    out.write("eigen_sliding.csv", &snapshot_csv(&sliding))?;

    if cfg.eigen.write_weights {
        for (k, s) in per_day.iter().enumerate() {
            out.write(&format!("weights/per_day_{k:04}.csv"), &weights_csv(s))?;
        }
        for (k, s) in sliding.iter().enumerate() {
            out.write(&format!("weights/sliding_{k:04}.csv"), &weights_csv(s))?;
        }
    }

    // correlograms of the daily eigenvalue series and its link to |intraday return|
    let lambdas: Vec<f64> = per_day.iter().map(|s| s.max_eigenvalue).collect();
    let n = lambdas.len();
    let acf_lag = cfg.eigen.max_lag.min(n.saturating_sub(3));
    if acf_lag >= 1 {
        if acf_lag < cfg.eigen.max_lag {
            out.warn(format!("eigenvalue ACF truncated to lag {acf_lag} ({n} days)"));
        }
        out.write("acf_per_day.csv", &correlogram_csv(&acf(&lambdas, acf_lag)?))?;
    } else {
        out.warn(format!("{n} days are too few for an eigenvalue ACF"));
    }

    let moves: BTreeMap<NaiveDate, f64> = daily_rows(cfg, Some(&panel))?
        .unwrap_or_default()
        .into_iter()
        .map(|(d, o, c)| (d, (c / o).ln().abs()))
        .collect();
    let (a, b): (Vec<f64>, Vec<f64>) = per_day
        .iter()
        .filter_map(|s| moves.get(&s.window_start.date).map(|m| (s.max_eigenvalue, *m)))
        .unzip();
    if a.len() < n {
        out.warn(format!("{} trading days lack an index bar; left out of the CCF", n - a.len()));
    }
    let ccf_lag = cfg.eigen.max_lag.min(a.len().saturating_sub(1) / 2);
    if ccf_lag >= 1 {
        if ccf_lag < cfg.eigen.max_lag {
            out.warn(format!("eigenvalue/|return| CCF truncated to lag {ccf_lag} ({} days)", a.len()));
        }
        out.write("ccf_per_day.csv", &correlogram_csv(&ccf(&a, &b, ccf_lag)?))?;
    } else {
        out.warn(format!("{} days are too few for an eigenvalue/|return| CCF", a.len()));
    }
    Ok(format!("{} per-day and {} sliding snapshots", per_day.len(), sliding.len()))
}

fn simulate_path(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    let params = cfg.simulate.params();
    let path = simulate(&params, cfg.simulate.len, cfg.seed)?;
    let omega = path.omega.as_deref().unwrap_or(&[]);
    let mut s = String::with_capacity(path.delta_x.len() * 48);
    s.push_str("index,delta_x,omega\n");
    for (i, (x, w)) in path.delta_x.iter().zip(omega).enumerate() {
        let _ = writeln!(s, "{i},{},{}", num(*x), num(*w));
    }
    out.write("simulate.csv", &s)?;
    Ok(format!(
        "{} increments, lambda2 = {}, L/dt = {}",
        path.delta_x.len(),
        params.lambda2,
        params.l_over_dt()
    ))
}

fn required(p: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    p.clone().ok_or_else(|| CliError::Config(format!("no {what} given")))
}

fn mrw_fit(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    let path = required(&cfg.mrw.series, "series file (mrw.series or positional argument)")?;
    let series = io::read_series(&path, cfg.mrw.column.as_deref())?;
    let max_lag = cfg.mrw.max_lag.unwrap_or(series.values.len().saturating_sub(1) / 4);
    let cov = log_abs_cov(&series.values, max_lag)?;
    out.extend_warnings(cov.warnings.iter().cloned());
    let fit = estimate_params(&cov, cfg.mrw.fit_range());

    let mut s = String::from("lag,cov,pairs,fitted\n");
    for ((k, c), p) in cov.lags.iter().zip(&cov.cov).zip(&cov.pairs) {
        let fitted = fit.as_ref().ok().map(|f| f.predict(*k as f64));
        let _ = writeln!(s, "{k},{},{p},{}", num(*c), opt(fitted));
    }
    out.write("log_abs_cov.csv", &s)?;

    let fit = fit?;
    out.extend_warnings(fit.warnings.iter().cloned());
    let report = serde_json::json!({
        "lambda2": fit.lambda2,
        "L_over_dt": fit.l_over_dt,
        "var_omega": fit.var_omega(),
        "r2": fit.r2,
        "fit_range": [fit.fit_range.0, fit.fit_range.1],
        "n_lags": fit.n_lags,
        "zero_crossing": fit.zero_crossing,
        "zero_exclusions": fit.zero_exclusions,
        "series_len": cov.series_len,
    });
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    out.write("mrw_fit.json", &text)?;
    Ok(format!("lambda2 = {}, L/dt = {}, r2 = {}", fit.lambda2, fit.l_over_dt, fit.r2))
}

fn alignment_text(report: &AlignmentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "slope window: {} trading days", report.slope_window_days);
    let _ = writeln!(s, "{:<12}{:>16}{:>11}{:>8}", "date", "slope", "ascending", "points");
    for e in &report.events {
        let _ = writeln!(
            s,
            "{:<12}{:>16.6e}{:>11}{:>8}",
            e.date.to_string(),
            e.slope,
            if e.ascending { "yes" } else { "no" },
            e.n_points
        );
    }
    for (d, why) in &report.excluded {
        let _ = writeln!(s, "excluded {d}: {why}");
    }
    let up = report.events.iter().filter(|e| e.ascending).count();
    match report.fraction_ascending() {
        Some(f) => {
            let _ = writeln!(s, "fraction ascending: {f} ({up}/{})", report.events.len());
        }
        None => {
            let _ = writeln!(s, "fraction ascending: n/a (no aligned events)");
        }
    }
    s
}

fn precursor(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    let pc = &cfg.precursor;
    let delta_t = cfg.returns.delta_t;
    let (series, panel) = match &pc.series {
        Some(p) => {
            let s = io::read_series(p, cfg.mrw.column.as_deref())?;
            let stamps = s
                .stamps
                .unwrap_or_else(|| synthetic_stamps(s.values.len(), delta_t, SYNTHETIC_DAY_MINUTES));
            (
                MarketModeSeries {
                    stamps,
                    values: s.values,
                    delta_t,
                },
                None,
            )
        }
        None => {
            let panel = load(cfg, out)?;
            let returns = normalized_returns(&panel, delta_t, out)?;
            let mm = market_mode_panel(&returns, cfg.mrw.block_days, cfg.mrw.weighting()?)?;
            let mut s = String::from("date,time,value\n");
            for (st, v) in mm.stamps.iter().zip(&mm.values) {
                let _ = writeln!(s, "{},{},{}", st.date, st.time_string(), num(*v));
            }
            out.write("market_mode.csv", &s)?;
            (mm, Some(panel))
        }
    };

    let indicator = sliding_indicator(&series, &cfg.sliding())?;
    let mut s = String::from("window_end,var_omega,lambda2,L_over_dt,r2,valid\n");
    for p in &indicator.points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            p.window_end,
            opt(p.var_omega),
            opt(p.lambda2),
            opt(p.l_over_dt),
            opt(p.r2),
            u8::from(p.is_valid())
        );
    }
    out.write("indicator.csv", &s)?;
    let failed = indicator.points.len() - indicator.valid_count();
    if failed > 0 {
        out.warn(format!("{failed} of {} indicator windows have no valid fit", indicator.points.len()));
    }

    let events: Vec<CrashEvent> = match &pc.events {
        Some(p) => io::read_events(p)?,
        None => match daily_rows(cfg, panel.as_ref())? {
            Some(rows) => {
                let lab = label_crashes(&chain_daily(&rows), pc.crash_threshold, pc.basis()?);
                out.extend_warnings(lab.warnings);
                lab.events
            }
            None => {
                out.warn("no index or event file given; no crash events");
                Vec::new()
            }
        },
    };
    let mut s = String::from("date,daily_return,intraday_return\n");
    for e in &events {
        let _ = writeln!(s, "{},{},{}", e.date, num(e.daily_return), num(e.intraday_return));
    }
    out.write("events.csv", &s)?;

    let report = align_events(&indicator, &events, pc.slope_window_days)?;
    for (d, why) in &report.excluded {
        out.warn(format!("event {d}: {why}"));
    }
    out.write("alignment.txt", &alignment_text(&report))?;
    Ok(format!(
        "{} of {} windows valid, {} events, fraction ascending {}",
        indicator.valid_count(),
        indicator.points.len(),
        events.len(),
        report.fraction_ascending().map_or("n/a".to_string(), |f| f.to_string())
    ))
}

fn acf_cmd(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    let k = &cfg.correlogram;
    let path = required(&k.series, "series file (correlogram.series or positional argument)")?;
    let s = io::read_series(&path, k.column.as_deref())?;
    let c = acf(&s.values, k.max_lag)?;
    out.write("acf.csv", &correlogram_csv(&c))?;
    Ok(format!("{} lags of {} points", c.lags.len(), s.values.len()))
}

fn ccf_cmd(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    let k = &cfg.correlogram;
    let a = io::read_series(&required(&k.series, "first series")?, k.column.as_deref())?;
    let b = io::read_series(&required(&k.other, "second series")?, k.other_column.as_deref())?;
    let c = ccf(&a.values, &b.values, k.max_lag)?;
    out.write("ccf.csv", &correlogram_csv(&c))?;
    Ok(format!("{} lags of {} points", c.lags.len(), a.values.len()))
}
