//! Windowed cross-correlation of de-seasonalized returns and the market mode.
//!
//! Each window standardizes every symbol's returns, forms
//! `C = G G^T / (T' - 1)` and extracts the leading eigenpair. The leading
//! eigenvector is the market mode; its eigenvalue measures how strongly the
//! whole panel moves together.

use std::ops::Range;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eigen::{max_eigenpair, relative_residual};
use crate::error::{Error, Result};
use crate::panel::ReturnPanel;
use crate::parallel::par_map;
use crate::stats;
use crate::time::Stamp;

/// Standardized returns of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedWindow {
    /// Panel rows kept in this window, in panel order.
    pub rows: Vec<usize>,
    pub symbols: Vec<String>,
    /// Symbols removed because they were absent or constant in the window.
    pub dropped: Vec<String>,
    /// Kept symbols by window columns; each row has mean 0 and sample std 1.
    pub g: DMatrix<f64>,
    pub stamps: Vec<Stamp>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl NormalizedWindow {
    pub fn n_symbols(&self) -> usize {
        self.g.nrows()
    }

    pub fn len(&self) -> usize {
        self.g.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.g.ncols() == 0
    }

    pub fn start(&self) -> Stamp {
        self.stamps[0]
    }

    pub fn end(&self) -> Stamp {
        self.stamps[self.stamps.len() - 1]
    }
}

/// Standardize each symbol over `columns`. Symbols with a gap or zero
/// variance in the window are dropped.
pub fn normalize_window(panel: &ReturnPanel, columns: Range<usize>) -> Result<NormalizedWindow> {
    if columns.end > panel.n_columns() || columns.len() < 2 {
        return Err(Error::invalid(format!(
            "window {}..{} needs at least two columns inside a panel of {}",
            columns.start,
            columns.end,
            panel.n_columns()
        )));
    }
    let width = columns.len();
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    let mut means = Vec::new();
    let mut stds = Vec::new();
    let mut data: Vec<Vec<f64>> = Vec::new();
    for i in 0..panel.n_symbols() {
        let row: Vec<f64> = panel.values.row(i).columns(columns.start, width).iter().copied().collect();
        let m = stats::mean(&row);
        let s = stats::sample_std(&row);
        if !(m.is_finite() && s.is_finite() && s > 0.0) {
            dropped.push(panel.symbols[i].clone());
            continue;
        }
        rows.push(i);
        means.push(m);
        stds.push(s);
        data.push(row.into_iter().map(|x| (x - m) / s).collect());
    }
    if rows.is_empty() {
        return Err(Error::invalid("every symbol is absent or constant in the window"));
    }
    if !dropped.is_empty() {
        warn!(
            "window starting {}: dropped {} symbol(s): {}",
            panel.stamps[columns.start],
            dropped.len(),
            dropped.join(" ")
        );
    }
    let g = DMatrix::from_fn(rows.len(), width, |r, c| data[r][c]);
    Ok(NormalizedWindow {
        symbols: rows.iter().map(|&i| panel.symbols[i].clone()).collect(),
        rows,
        dropped,
        g,
        stamps: panel.stamps[columns].to_vec(),
        means,
        stds,
    })
}

/// `C = G G^T / (T' - 1)`.
pub fn correlation_matrix(win: &NormalizedWindow) -> DMatrix<f64> {
    let t = win.len();
    let mut c = &win.g * win.g.transpose();
    c /= (t - 1) as f64;
    // exact symmetry regardless of summation order
    for i in 0..c.nrows() {
        for j in 0..i {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Leading-eigenpair summary of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSnapshot {
    pub window_start: Stamp,
    pub window_end: Stamp,
    pub symbols: Vec<String>,
    pub dropped: Vec<String>,
    pub max_eigenvalue: f64,
    pub market_mode_weights: Vec<f64>,
    /// Descending; absent when the large-matrix solver ran.
    pub eigenvalues: Option<Vec<f64>>,
    /// `||Cv - lambda v|| / ||C||_F`.
    pub residual: f64,
}

impl CorrelationSnapshot {
    pub fn n_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn label(&self) -> String {
        format!("{}..{}", self.window_start, self.window_end)
    }

    /// Check the properties every correlation spectrum must have.
    pub fn check(&self) -> Result<()> {
        let n = self.n_symbols() as f64;
        let fail = |what: String| Err(Error::invalid(format!("snapshot {}: {what}", self.label())));
        if !(self.max_eigenvalue >= 1.0 - 1e-9 && self.max_eigenvalue <= n + 1e-9 * n) {
            return fail(format!("max eigenvalue {} outside [1, {n}]", self.max_eigenvalue));
        }
        if self.residual > 1e-8 {
            return fail(format!("eigenpair residual {:e}", self.residual));
        }
        let norm: f64 = self.market_mode_weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return fail(format!("weights have norm {norm}"));
        }
        if let Some(ev) = &self.eigenvalues {
            if let Some(neg) = ev.iter().find(|&&v| v < -1e-8) {
                return fail(format!("negative eigenvalue {neg}"));
            }
            let trace: f64 = ev.iter().sum();
            if ((trace - n) / n).abs() > 1e-6 {
                return fail(format!("eigenvalues sum to {trace}, expected {n}"));
            }
        }
        Ok(())
    }
}

/// Correlation, leading eigenpair and invariant checks for one window.
pub fn snapshot(win: &NormalizedWindow) -> Result<CorrelationSnapshot> {
    let c = correlation_matrix(win);
    let pair = max_eigenpair(&c)?;
    let residual = relative_residual(&c, pair.value, &pair.vector);
    let snap = CorrelationSnapshot {
        window_start: win.start(),
        window_end: win.end(),
        symbols: win.symbols.clone(),
        dropped: win.dropped.clone(),
        max_eigenvalue: pair.value,
        market_mode_weights: pair.vector.iter().copied().collect(),
        eigenvalues: pair.spectrum,
        residual,
    };
    snap.check()?;
    Ok(snap)
}

/// How windows are laid over the trading days of a panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// One window per trading day.
    PerDay,
    /// `width_days` consecutive days, advanced by `step_days`.
    Sliding { width_days: usize, step_days: usize },
}

impl Scheme {
    /// Five average trading days wide, advanced one day at a time.
    pub fn sliding_default() -> Self {
        Scheme::Sliding {
            width_days: 5,
            step_days: 1,
        }
    }

    /// Column ranges of every window over `panel`.
    pub fn windows(&self, panel: &ReturnPanel) -> Result<Vec<Range<usize>>> {
        let days = panel.day_ranges();
        let (width, step) = match *self {
            Scheme::PerDay => (1, 1),
            Scheme::Sliding { width_days, step_days } => (width_days, step_days),
        };
        if width == 0 || step == 0 {
            return Err(Error::invalid("window width and step must be positive"));
        }
        if days.len() < width {
            return Err(Error::invalid(format!(
                "panel has {} trading days, window needs {width}",
                days.len()
            )));
        }
        let count = (days.len() - width) / step + 1;
        Ok((0..count)
            .map(|k| {
                let first = k * step;
                days[first].start..days[first + width - 1].end
            })
            .collect())
    }
}

/// One correlation snapshot per window of `scheme`, in time order.
pub fn rolling_eigenvalues(panel: &ReturnPanel, scheme: Scheme) -> Result<Vec<CorrelationSnapshot>> {
    let windows = scheme.windows(panel)?;
    par_map(&windows, |range| {
        normalize_window(panel, range.clone())
            .and_then(|w| snapshot(&w))
            .map_err(|e| {
                let label = match range.len() {
                    0 => format!("columns {}..{}", range.start, range.end),
                    _ => format!("{}..{}", panel.stamps[range.start], panel.stamps[range.end - 1]),
                };
                e.in_window(label)
            })
    })
    .into_iter()
    .collect()
}

/// Projection of standardized returns onto market-mode weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketModeSeries {
    pub stamps: Vec<Stamp>,
    pub values: Vec<f64>,
    /// Sampling interval in minutes.
    pub delta_t: u32,
}

impl MarketModeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// A bare series placed on a synthetic weekday calendar.
    pub fn from_values(values: Vec<f64>, delta_t: u32, minutes_per_day: u32) -> Self {
        MarketModeSeries {
            stamps: crate::time::synthetic_stamps(values.len(), delta_t, minutes_per_day),
            values,
            delta_t,
        }
    }
}

/// `dM(j) = sum_i w_i g_ij`.
pub fn market_mode_series(win: &NormalizedWindow, weights: &[f64], delta_t: u32) -> Result<MarketModeSeries> {
    if weights.len() != win.n_symbols() {
        return Err(Error::invalid(format!(
            "{} weights for a window of {} symbols",
            weights.len(),
            win.n_symbols()
        )));
    }
    let w = DVector::from_column_slice(weights);
    let values = (win.g.transpose() * w).iter().copied().collect();
    Ok(MarketModeSeries {
        stamps: win.stamps.clone(),
        values,
        delta_t,
    })
}

/// Which eigenvector projects each block of the panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Weighting {
    /// Each block uses its own market mode.
    #[default]
    PerWindow,
    /// One market mode from the whole panel, applied to every block.
    Global,
}

/// Market-mode series over the whole panel: consecutive non-overlapping
/// blocks of `block_days` days, each standardized on its own and projected,
/// then concatenated.
pub fn market_mode_panel(panel: &ReturnPanel, block_days: usize, weighting: Weighting) -> Result<MarketModeSeries> {
    if block_days == 0 {
        return Err(Error::invalid("block_days must be positive"));
    }
    let days = panel.day_ranges();
    let blocks: Vec<Range<usize>> = days
        .chunks(block_days)
        .map(|c| c[0].start..c[c.len() - 1].end)
        .filter(|r| r.len() >= 2)
        .collect();
    if blocks.is_empty() {
        return Err(Error::invalid("panel has no block with at least two returns"));
    }
    let global: Option<Vec<f64>> = match weighting {
        Weighting::PerWindow => None,
        Weighting::Global => {
            let win = normalize_window(panel, 0..panel.n_columns())?;
            let snap = snapshot(&win)?;
            let mut full = vec![0.0; panel.n_symbols()];
            for (&row, w) in win.rows.iter().zip(&snap.market_mode_weights) {
                full[row] = *w;
            }
            Some(full)
        }
    };
    let parts = par_map(&blocks, |range| -> Result<MarketModeSeries> {
        let win = normalize_window(panel, range.clone())?;
        let weights = match &global {
            Some(full) => win.rows.iter().map(|&r| full[r]).collect(),
            None => snapshot(&win)?.market_mode_weights,
        };
        market_mode_series(&win, &weights, panel.delta_t)
    });
    let mut out = MarketModeSeries {
        stamps: Vec::new(),
        values: Vec::new(),
        delta_t: panel.delta_t,
    };
    for p in parts {
        let p = p?;
        out.stamps.extend(p.stamps);
        out.values.extend(p.values);
    }
    Ok(out)
}
