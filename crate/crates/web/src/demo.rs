//! Plain-Rust operations behind the browser bindings, testable natively.

use marketmode::mrw::{
    default_scales, estimate_params, fit_zeta, log_abs_cov, moment_scaling, simulate, zeta_model, FitRange,
    MrwParams,
};

/// Longest path the page may request.
pub const MAX_LEN: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub delta_x: Vec<f64>,
    pub omega: Vec<f64>,
    /// Cumulative sum of `delta_x`, starting at zero.
    pub log_price: Vec<f64>,
}

pub fn run_simulation(sigma: f64, lambda2: f64, l_over_dt: f64, len: usize, seed: u64) -> Result<Simulation, String> {
    if len == 0 || len > MAX_LEN {
        return Err(format!("length must lie in 1..={MAX_LEN}"));
    }
    let path = simulate(&MrwParams::unit(sigma, lambda2, l_over_dt), len, seed).map_err(|e| e.to_string())?;
    let log_price = std::iter::once(0.0)
        .chain(path.delta_x.iter().scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        }))
        .collect();
    Ok(Simulation {
        omega: path.omega.unwrap_or_default(),
        delta_x: path.delta_x,
        log_price,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovFit {
    pub lags: Vec<f64>,
    pub cov: Vec<f64>,
    /// Model line `lambda2 (ln(L/dt) - ln k)` at every lag.
    pub fitted: Vec<f64>,
    pub lambda2: f64,
    pub l_over_dt: f64,
    pub var_omega: f64,
    pub r2: f64,
    pub fit_lo: usize,
    pub fit_hi: usize,
}

/// `fit_hi = 0` stops at the first negative covariance.
pub fn run_cov_fit(series: &[f64], max_lag: usize, fit_lo: usize, fit_hi: usize) -> Result<CovFit, String> {
    let cov = log_abs_cov(series, max_lag).map_err(|e| e.to_string())?;
    let range = FitRange {
        lo: fit_lo,
        hi: (fit_hi > 0).then_some(fit_hi),
    };
    let fit = estimate_params(&cov, range).map_err(|e| e.to_string())?;
    Ok(CovFit {
        lags: cov.lags.iter().map(|&k| k as f64).collect(),
        fitted: cov.lags.iter().map(|&k| fit.predict(k as f64)).collect(),
        cov: cov.cov,
        lambda2: fit.lambda2,
        l_over_dt: fit.l_over_dt,
        var_omega: fit.var_omega(),
        r2: fit.r2,
        fit_lo: fit.fit_range.0,
        fit_hi: fit.fit_range.1,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub q: Vec<f64>,
    pub empirical: Vec<f64>,
    /// Model exponents at the requested `lambda2`.
    pub model: Vec<f64>,
    /// Least-squares `lambda2` of the empirical exponents.
    pub fitted_lambda2: f64,
}

/// Moment exponents for `q = 0.5, 1.0, ..., 5.0` over 10 to 700 samples.
pub fn run_spectrum(series: &[f64], lambda2: f64) -> Result<Spectrum, String> {
    let q: Vec<f64> = (1..=10).map(|i| i as f64 * 0.5).collect();
    let scaling = moment_scaling(series, &q, &default_scales(1)).map_err(|e| e.to_string())?;
    let fit = fit_zeta(&scaling).map_err(|e| e.to_string())?;
    Ok(Spectrum {
        model: q.iter().map(|&q| zeta_model(q, lambda2)).collect(),
        empirical: scaling.zeta,
        fitted_lambda2: fit.lambda2,
        q,
    })
}
