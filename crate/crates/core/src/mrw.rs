//! Multifractal random walk: simulation, moment scaling and estimation of
//! the intermittency `lambda2` and decorrelation length `L`.
//!
//! The discrete increments are `dX[i] = eps[i] * exp(omega[i])` where `eps`
//! is Gaussian white noise of variance `sigma^2 dt` and `omega` is a
//! stationary Gaussian process with mean `-Var(omega)` and covariance
//! `lambda2 * ln rho(|i - j|)`, `rho(k) = (L/dt) / (|k| + 1)` up to lag
//! `L/dt - 1` and `1` beyond. All lags are in samples; `L` enters only
//! through the ratio `L/dt`.

use serde::{Deserialize, Serialize};

use crate::circulant::CirculantSampler;
use crate::error::{Error, Result};
use crate::rng::task_rng;
use crate::stats::{self, linear_fit};

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Full MRW parameterization. `l` and `delta_t` share a time unit (minutes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrwParams {
    pub sigma: f64,
    pub lambda2: f64,
    pub l: f64,
    pub delta_t: f64,
}

impl MrwParams {
    /// Parameters with `delta_t = 1`, so that `l` is directly `L/dt`.
    pub fn unit(sigma: f64, lambda2: f64, l_over_dt: f64) -> Self {
        MrwParams {
            sigma,
            lambda2,
            l: l_over_dt,
            delta_t: 1.0,
        }
    }

    pub fn l_over_dt(&self) -> f64 {
        self.l / self.delta_t
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma > 0.0
            && self.lambda2 >= 0.0
            && self.delta_t > 0.0
            && self.l >= self.delta_t
            && [self.sigma, self.lambda2, self.l, self.delta_t].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "MRW parameters need sigma > 0, lambda2 >= 0, L >= dt > 0 (got {self:?})"
            )))
        }
    }
}

/// `rho(k) = (L/dt) / (|k| + 1)` for `|k| <= L/dt - 1`, else 1.
pub fn rho(k: i64, l_over_dt: f64) -> f64 {
    let k = k.unsigned_abs() as f64;
    if k <= l_over_dt - 1.0 {
        l_over_dt / (k + 1.0)
    } else {
        1.0
    }
}

/// `Cov(omega[i], omega[i+k]) = lambda2 * ln rho(k)`.
pub fn omega_covariance(k: i64, params: &MrwParams) -> f64 {
    params.lambda2 * rho(k, params.l_over_dt()).ln()
}

/// `Var(omega) = lambda2 * ln(L/dt)`: the log-volatility variance used as the
/// collective-behaviour indicator.
pub fn volatility_log_variance(params: &MrwParams) -> f64 {
    params.lambda2 * params.l_over_dt().ln()
}

/// A simulated (or observed) increment series.
#[derive(Debug, Clone, PartialEq)]
pub struct MrwPath {
    pub delta_x: Vec<f64>,
    /// Latent log-volatility; present only for simulated paths.
    pub omega: Option<Vec<f64>>,
    pub params: MrwParams,
    pub seed: Option<u64>,
}

fn omega_sampler(params: &MrwParams, len: usize) -> Result<CirculantSampler> {
    // covariance vanishes from lag floor(L/dt - 1) + 1 on
    let support = (params.l_over_dt() - 1.0).floor().max(0.0) as usize + 1;
    CirculantSampler::new(|k| omega_covariance(k as i64, params), len, Some(support))
}

/// Exact MRW path of length `len`, reproducible from `seed`.
pub fn simulate(params: &MrwParams, len: usize, seed: u64) -> Result<MrwPath> {
    params.validate()?;
    if len < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: len });
    }
    let sampler = omega_sampler(params, len)?;
    let mut rng = task_rng(seed, 0);
    Ok(draw(params, &sampler, &mut rng, seed))
}

/// `reps` independent paths sharing one embedding; path `r` uses stream `r`
/// of `seed`.
pub fn simulate_many(params: &MrwParams, len: usize, reps: usize, seed: u64) -> Result<Vec<MrwPath>> {
    params.validate()?;
    if len < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: len });
    }
    let sampler = omega_sampler(params, len)?;
    let ids: Vec<u64> = (0..reps as u64).collect();
    Ok(crate::parallel::par_map(&ids, |&r| {
        let mut rng = task_rng(seed, r);
        draw(params, &sampler, &mut rng, seed)
    }))
}

fn draw<R: Rng>(params: &MrwParams, sampler: &CirculantSampler, rng: &mut R, seed: u64) -> MrwPath {
    let mean = -volatility_log_variance(params);
    let omega: Vec<f64> = sampler.sample(rng).into_iter().map(|w| w + mean).collect();
    let eps_sd = params.sigma * params.delta_t.sqrt();
    let delta_x = omega
        .iter()
        .map(|w| {
            let e: f64 = rng.sample(StandardNormal);
            eps_sd * e * w.exp()
        })
        .collect();
    MrwPath {
        delta_x,
        omega: Some(omega),
        params: *params,
        seed: Some(seed),
    }
}

/// Concatenation of independent segments with their own parameters, e.g.
/// a regime switch. Segment `s` draws from stream `s` of `seed`.
pub fn simulate_spliced(segments: &[(MrwParams, usize)], seed: u64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (s, (params, len)) in segments.iter().enumerate() {
        params.validate()?;
        let sampler = omega_sampler(params, *len)?;
        let mut rng = task_rng(seed, s as u64);
        out.extend(draw(params, &sampler, &mut rng, seed).delta_x);
    }
    Ok(out)
}

/// `sigma^2` estimate `Var(dX)/dt`; exact in expectation because
/// `E exp(2 omega) = 1` under the mean convention.
pub fn estimate_sigma(series: &[f64], delta_t: f64) -> f64 {
    (stats::sample_var(series) / delta_t).sqrt()
}

/// `zeta_q = (q - q (q - 2) lambda2) / 2`.
pub fn zeta_model(q: f64, lambda2: f64) -> f64 {
    (q - q * (q - 2.0) * lambda2) / 2.0
}

/// Sample absolute moments of aggregated increments and their log-log slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentScaling {
    pub q: Vec<f64>,
    /// Aggregation scales in samples, strictly increasing.
    pub scales: Vec<usize>,
    /// `moments[qi][si] = mean |sum of block|^q`.
    pub moments: Vec<Vec<f64>>,
    pub zeta: Vec<f64>,
    pub zeta_se: Vec<f64>,
}

/// About a dozen log-spaced aggregation factors covering 10 to 700 minutes
/// for a series sampled every `base_minutes`.
pub fn default_scales(base_minutes: u32) -> Vec<usize> {
    let base = base_minutes.max(1) as f64;
    let (lo, hi) = (10.0 / base, 700.0 / base);
    let lo = lo.max(1.0);
    if hi < lo {
        return vec![];
    }
    let points = 12;
    let mut out: Vec<usize> = (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            (lo.ln() + t * (hi.ln() - lo.ln())).exp().round() as usize
        })
        .filter(|&s| s >= 1)
        .collect();
    out.dedup();
    out
}

pub fn moment_scaling(series: &[f64], q_list: &[f64], scales: &[usize]) -> Result<MomentScaling> {
    moment_scaling_pooled(&[series], q_list, scales)
}

/// Moments pooled over independent realizations (weighted by block count),
/// then one least-squares slope of `ln M` against `ln scale` per `q`.
pub fn moment_scaling_pooled(paths: &[&[f64]], q_list: &[f64], scales: &[usize]) -> Result<MomentScaling> {
    if scales.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: scales.len(),
        });
    }
    if scales[0] == 0 || scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("scales must be positive and strictly increasing"));
    }
    if q_list.is_empty() || q_list.iter().any(|&q| !(q > 0.0 && q <= 6.0)) {
        return Err(Error::invalid("moment orders must lie in (0, 6]"));
    }
    let largest = *scales.last().expect("non-empty");
    if paths.is_empty() {
        return Err(Error::invalid("no series given"));
    }
    for p in paths {
        if p.len() < 20 * largest {
            return Err(Error::TooFewPoints {
                needed: 20 * largest,
                got: p.len(),
            });
        }
    }
    let mut moments = vec![vec![0.0; scales.len()]; q_list.len()];
    for (si, &s) in scales.iter().enumerate() {
        let mut sums = vec![0.0; q_list.len()];
        let mut blocks = 0usize;
        for p in paths {
            for chunk in p.chunks_exact(s) {
                let a = chunk.iter().sum::<f64>().abs();
                for (qi, &q) in q_list.iter().enumerate() {
                    sums[qi] += a.powf(q);
                }
                blocks += 1;
            }
        }
        for qi in 0..q_list.len() {
            moments[qi][si] = sums[qi] / blocks as f64;
        }
    }
    let x: Vec<f64> = scales.iter().map(|&s| (s as f64).ln()).collect();
    let mut zeta = Vec::with_capacity(q_list.len());
    let mut zeta_se = Vec::with_capacity(q_list.len());
    for row in &moments {
        if row.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::invalid("a sample moment is zero; series is degenerate"));
        }
        let y: Vec<f64> = row.iter().map(|m| m.ln()).collect();
        let fit = linear_fit(&x, &y)?;
        zeta.push(fit.slope);
        zeta_se.push(fit.slope_se);
    }
    Ok(MomentScaling {
        q: q_list.to_vec(),
        scales: scales.to_vec(),
        moments,
        zeta,
        zeta_se,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaFit {
    pub lambda2: f64,
    /// Root-mean-square deviation of the estimated exponents from the model.
    pub residual: f64,
    /// The unconstrained optimum was negative and got pinned to zero: the
    /// series looks monofractal.
    pub at_boundary: bool,
}

/// Least-squares `lambda2 >= 0` for `zeta_q = (q - q (q-2) lambda2) / 2`.
pub fn fit_zeta(scaling: &MomentScaling) -> Result<ZetaFit> {
    fit_zeta_points(&scaling.q, &scaling.zeta)
}

pub fn fit_zeta_points(q: &[f64], zeta: &[f64]) -> Result<ZetaFit> {
    if q.len() != zeta.len() {
        return Err(Error::invalid("q and zeta differ in length"));
    }
    if q.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: q.len() });
    }
    debug_assert_eq!(zeta_model(2.0, 0.37), 1.0);
    // zeta = q/2 - lambda2 * a_q with a_q = q(q-2)/2
    let a: Vec<f64> = q.iter().map(|&q| q * (q - 2.0) / 2.0).collect();
    let saa: f64 = a.iter().map(|v| v * v).sum();
    if saa == 0.0 {
        return Err(Error::invalid("every q equals 2 (or 0); lambda2 is not identifiable"));
    }
    let sab: f64 = a.iter().zip(q.iter().zip(zeta)).map(|(a, (q, z))| a * (q / 2.0 - z)).sum();
    let raw = sab / saa;
    let lambda2 = raw.max(0.0);
    let residual = (q
        .iter()
        .zip(zeta)
        .map(|(&q, &z)| (z - zeta_model(q, lambda2)).powi(2))
        .sum::<f64>()
        / q.len() as f64)
        .sqrt();
    Ok(ZetaFit {
        lambda2,
        residual,
        at_boundary: raw <= 0.0,
    })
}

/// Sample covariance of `ln|dX[i]|` and `ln|dX[i+k]|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogAbsCovariance {
    /// `1..=max_lag`.
    pub lags: Vec<usize>,
    pub cov: Vec<f64>,
    /// Number of contributing pairs per lag.
    pub pairs: Vec<usize>,
    /// Samples that were exactly zero and therefore left out.
    pub zero_exclusions: usize,
    pub series_len: usize,
    pub warnings: Vec<String>,
}

/// Lagged covariance of log absolute values for `k = 1..=max_lag`. Exact
/// zeros are excluded pairwise; each lag is normalized by its own pair count.
pub fn log_abs_cov(series: &[f64], max_lag: usize) -> Result<LogAbsCovariance> {
    let n = series.len();
    if max_lag == 0 {
        return Err(Error::invalid("max_lag must be at least 1"));
    }
    if n <= 4 * max_lag {
        return Err(Error::TooFewPoints {
            needed: 4 * max_lag + 1,
            got: n,
        });
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    let mask: Vec<f64> = series.iter().map(|&x| if x != 0.0 { 1.0 } else { 0.0 }).collect();
    let valid = mask.iter().filter(|&&m| m > 0.0).count();
    let zero_exclusions = n - valid;
    if valid < 2 {
        return Err(Error::invalid("fewer than two non-zero values"));
    }
    let logs: Vec<f64> = series.iter().map(|&x| if x != 0.0 { x.abs().ln() } else { 0.0 }).collect();
    let mu = logs.iter().sum::<f64>() / valid as f64;
    let centered: Vec<f64> = logs.iter().zip(&mask).map(|(l, m)| (l - mu) * m).collect();

    let sums = autocorrelation_sums(&centered, max_lag);
    let pairs: Vec<usize> = if zero_exclusions == 0 {
        (1..=max_lag).map(|k| n - k).collect()
    } else {
        autocorrelation_sums(&mask, max_lag)
            .iter()
            .map(|c| c.round() as usize)
            .collect()
    };
    let cov = sums
        .iter()
        .zip(&pairs)
        .map(|(s, &p)| if p > 0 { s / p as f64 } else { f64::NAN })
        .collect();

    let mut warnings = Vec::new();
    if zero_exclusions * 10 > n {
        warnings.push(format!(
            "{zero_exclusions} of {n} samples are exactly zero and were excluded"
        ));
    }
    Ok(LogAbsCovariance {
        lags: (1..=max_lag).collect(),
        cov,
        pairs,
        zero_exclusions,
        series_len: n,
        warnings,
    })
}

/// `sum_i x[i] x[i+k]` for `k = 1..=max_lag` via zero-padded FFT.
fn autocorrelation_sums(x: &[f64], max_lag: usize) -> Vec<f64> {
    let size = (x.len() + max_lag + 1).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex64> = x
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(size)
        .collect();
    fwd.process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex64::new(c.norm_sqr(), 0.0);
    }
    inv.process(&mut buf);
    let scale = size as f64;
    buf[1..=max_lag].iter().map(|c| c.re / scale).collect()
}

/// Lag bounds for the semi-log regression. `hi = None` stops just before the
/// first lag at or after `lo` where the covariance turns negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitRange {
    pub lo: usize,
    pub hi: Option<usize>,
}

impl Default for FitRange {
    fn default() -> Self {
        FitRange { lo: 10, hi: None }
    }
}

/// Minimum number of lags the regression accepts.
pub const MIN_FIT_LAGS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrwFit {
    pub lambda2: f64,
    pub l_over_dt: f64,
    /// `ln(L/dt)`, kept separately so `Var(omega)` never round-trips
    /// through `exp`.
    pub ln_l_over_dt: f64,
    pub r2: f64,
    /// Inclusive lag bounds actually used.
    pub fit_range: (usize, usize),
    pub n_lags: usize,
    /// First lag with negative covariance: a model-free estimate of `L/dt`.
    pub zero_crossing: Option<usize>,
    pub zero_exclusions: usize,
    pub warnings: Vec<String>,
}

impl MrwFit {
    pub fn var_omega(&self) -> f64 {
        self.lambda2 * self.ln_l_over_dt
    }

    /// Model covariance `lambda2 (ln(L/dt) - ln k)` at lag `k`.
    pub fn predict(&self, k: f64) -> f64 {
        self.lambda2 * (self.ln_l_over_dt - k.ln())
    }
}

/// Fit `Cov(k) = lambda2 (ln(L/dt) - ln k)` by ordinary least squares in
/// `ln k` over the given lag range.
pub fn estimate_params(cov: &LogAbsCovariance, range: FitRange) -> Result<MrwFit> {
    let max_lag = cov.lags.last().copied().unwrap_or(0);
    if range.lo == 0 || range.lo > max_lag {
        return Err(Error::invalid(format!(
            "fit range starts at lag {} but covariance covers 1..={max_lag}",
            range.lo
        )));
    }
    let zero_crossing = cov
        .lags
        .iter()
        .zip(&cov.cov)
        .find(|(_, &c)| c < 0.0)
        .map(|(&k, _)| k);
    let hi = match range.hi {
        Some(h) if h > max_lag => {
            return Err(Error::invalid(format!(
                "fit range ends at lag {h} but covariance covers 1..={max_lag}"
            )))
        }
        Some(h) => h,
        None => cov
            .lags
            .iter()
            .zip(&cov.cov)
            .find(|(&k, &c)| k >= range.lo && c < 0.0)
            .map(|(&k, _)| k - 1)
            .unwrap_or(max_lag),
    };
    let (x, y): (Vec<f64>, Vec<f64>) = cov
        .lags
        .iter()
        .zip(&cov.cov)
        .filter(|(&k, c)| k >= range.lo && k <= hi && c.is_finite())
        .map(|(&k, &c)| ((k as f64).ln(), c))
        .unzip();
    if x.len() < MIN_FIT_LAGS {
        return Err(Error::TooFewPoints {
            needed: MIN_FIT_LAGS,
            got: x.len(),
        });
    }
    let fit = linear_fit(&x, &y)?;
    if !(fit.slope < 0.0) {
        return Err(Error::MrwFitInvalid(format!(
            "covariance does not decay with lag (slope {:e})",
            fit.slope
        )));
    }
    let lambda2 = -fit.slope;
    let ln_l_over_dt = fit.intercept / lambda2;
    let l_over_dt = ln_l_over_dt.exp();
    if !l_over_dt.is_finite() {
        // a nearly flat covariance: no finite decorrelation length fits it
        return Err(Error::MrwFitInvalid(format!(
            "decorrelation length overflows (slope {:e}, ln(L/dt) = {ln_l_over_dt:e})",
            fit.slope
        )));
    }
    let mut warnings = cov.warnings.clone();
    if l_over_dt > cov.series_len as f64 {
        warnings.push(format!(
            "estimated L/dt = {l_over_dt:.1} exceeds the series length {}",
            cov.series_len
        ));
    }
    Ok(MrwFit {
        lambda2,
        l_over_dt,
        ln_l_over_dt,
        r2: fit.r2,
        fit_range: (range.lo, hi),
        n_lags: x.len(),
        zero_crossing,
        zero_exclusions: cov.zero_exclusions,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig4() -> MrwParams {
        MrwParams::unit(1.0, 0.014, 1025.0)
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho(0, 1025.0), 1025.0);
        assert_eq!(rho(1024, 1025.0), 1.0);
        assert_eq!(rho(-1024, 1025.0), 1.0);
        assert_eq!(rho(5000, 1025.0), 1.0);
        assert_eq!(rho(4, 1025.0), 205.0);
    }

    #[test]
    fn omega_covariance_examples() {
        let p = fig4();
        assert!((omega_covariance(0, &p) - 0.014 * 1025f64.ln()).abs() < 1e-15);
        assert!((omega_covariance(0, &p) - 0.09705).abs() < 5e-6);
        assert_eq!(omega_covariance(1024, &p), 0.0);
        assert_eq!(omega_covariance(3000, &p), 0.0);
        let flat = MrwParams::unit(1.0, 0.0, 1025.0);
        assert!((0..50).all(|k| omega_covariance(k, &flat) == 0.0));
    }

    #[test]
    fn volatility_log_variance_examples() {
        assert!((volatility_log_variance(&fig4()) - 0.09705).abs() < 5e-6);
        assert_eq!(volatility_log_variance(&MrwParams::unit(1.0, 0.0, 1025.0)), 0.0);
        let p = MrwParams {
            sigma: 1.0,
            lambda2: 0.3,
            l: 5.0,
            delta_t: 5.0,
        };
        assert_eq!(volatility_log_variance(&p), 0.0);
    }

    #[test]
    fn covariance_is_non_increasing_and_compact() {
        for ratio in [1.0, 2.5, 64.0, 1025.0] {
            let p = MrwParams::unit(1.0, 0.05, ratio);
            let c: Vec<f64> = (0..2000).map(|k| omega_covariance(k, &p)).collect();
            assert!(c.windows(2).all(|w| w[1] <= w[0]));
            let cut = (ratio - 1.0).ceil().max(0.0) as usize;
            assert!(c[cut..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(MrwParams::unit(0.0, 0.01, 10.0).validate().is_err());
        assert!(MrwParams::unit(1.0, -0.01, 10.0).validate().is_err());
        assert!(MrwParams::unit(1.0, 0.01, 0.5).validate().is_err());
        assert!(simulate(&fig4(), 1, 0).is_err());
    }

    #[test]
    fn simulation_is_deterministic() {
        let a = simulate(&fig4(), 4096, 42).unwrap();
        let b = simulate(&fig4(), 4096, 42).unwrap();
        let c = simulate(&fig4(), 4096, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.delta_x, c.delta_x);
        let many = simulate_many(&fig4(), 4096, 3, 42).unwrap();
        assert_eq!(many[0].delta_x, a.delta_x);
    }

    #[test]
    fn zero_intermittency_is_white_noise() {
        let p = MrwParams::unit(2.0, 0.0, 1024.0);
        let path = simulate(&p, 1 << 15, 9).unwrap();
        assert!(path.omega.as_ref().unwrap().iter().all(|&w| w == 0.0));
        let var = stats::sample_var(&path.delta_x);
        // sampling sd of the variance is about 4 * sqrt(2/n)
        assert!((var - 4.0).abs() < 4.0 * 4.0 * (2.0 / (1u32 << 15) as f64).sqrt());
        let r = crate::correlogram::acf(&path.delta_x, 20).unwrap();
        let inside = r.values[1..].iter().filter(|v| v.abs() < r.band).count();
        assert!(inside >= 18);
    }

    #[test]
    fn latent_mean_matches_convention() {
        let p = MrwParams::unit(1.0, 0.02, 256.0);
        let paths = simulate_many(&p, 1 << 14, 20, 3).unwrap();
        let means: Vec<f64> = paths.iter().map(|x| stats::mean(x.omega.as_ref().unwrap())).collect();
        let m = stats::mean(&means);
        let se = stats::sample_std(&means) / (means.len() as f64).sqrt();
        assert!((m + volatility_log_variance(&p)).abs() < 3.0 * se, "{m} vs {}", -volatility_log_variance(&p));
    }

    fn brute_log_abs_cov(x: &[f64], k: usize) -> f64 {
        let logs: Vec<Option<f64>> = x.iter().map(|&v| (v != 0.0).then(|| v.abs().ln())).collect();
        let vals: Vec<f64> = logs.iter().flatten().copied().collect();
        let mu = stats::mean(&vals);
        let mut s = 0.0;
        let mut p = 0usize;
        for i in 0..x.len() - k {
            if let (Some(a), Some(b)) = (logs[i], logs[i + k]) {
                s += (a - mu) * (b - mu);
                p += 1;
            }
        }
        s / p as f64
    }

    #[test]
    fn fft_covariance_matches_brute_force() {
        let mut x = simulate(&MrwParams::unit(1.0, 0.03, 64.0), 3000, 5).unwrap().delta_x;
        for i in (0..3000).step_by(97) {
            x[i] = 0.0;
        }
        let c = log_abs_cov(&x, 50).unwrap();
        assert_eq!(c.zero_exclusions, 31);
        for k in [1usize, 2, 17, 50] {
            assert!((c.cov[k - 1] - brute_log_abs_cov(&x, k)).abs() < 1e-10);
        }
        assert_eq!(c.pairs[0], (0..2999).filter(|&i| x[i] != 0.0 && x[i + 1] != 0.0).count());
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn many_zeros_raise_a_warning() {
        let x: Vec<f64> = (0..500).map(|i| if i % 5 == 0 { 0.0 } else { 1.0 + (i % 7) as f64 }).collect();
        let c = log_abs_cov(&x, 10).unwrap();
        assert_eq!(c.zero_exclusions, 100);
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn log_abs_cov_is_scale_invariant() {
        let x = simulate(&fig4(), 8192, 1).unwrap().delta_x;
        let y: Vec<f64> = x.iter().map(|v| v * 37.5).collect();
        let (a, b) = (log_abs_cov(&x, 100).unwrap(), log_abs_cov(&y, 100).unwrap());
        for (u, v) in a.cov.iter().zip(&b.cov) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_volatility_has_no_log_covariance() {
        let x = simulate(&MrwParams::unit(1.0, 0.0, 100.0), 40_000, 2).unwrap().delta_x;
        let c = log_abs_cov(&x, 20).unwrap();
        // Var(ln|N(0,1)|) = pi^2 / 2
        let se = std::f64::consts::PI.powi(2) / 2.0 / (40_000f64).sqrt();
        assert!(c.cov.iter().all(|v| v.abs() < 4.0 * se));
    }

    fn exact_cov(lambda2: f64, ratio: f64, max_lag: usize) -> LogAbsCovariance {
        LogAbsCovariance {
            lags: (1..=max_lag).collect(),
            cov: (1..=max_lag).map(|k| lambda2 * (ratio.ln() - (k as f64).ln())).collect(),
            pairs: vec![100_000; max_lag],
            zero_exclusions: 0,
            series_len: 100_000,
            warnings: vec![],
        }
    }

    #[test]
    fn exact_covariance_is_inverted() {
        let c = exact_cov(0.014, 1025.0, 1024);
        let fit = estimate_params(&c, FitRange { lo: 10, hi: Some(1024) }).unwrap();
        assert!((fit.lambda2 - 0.014).abs() < 1e-8);
        assert!((fit.l_over_dt - 1025.0).abs() < 1e-8);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!((fit.var_omega() - 0.09705).abs() < 5e-6);
        // default range runs to the last lag since nothing is negative
        let auto = estimate_params(&c, FitRange::default()).unwrap();
        assert_eq!(auto.fit_range, (10, 1024));
        assert_eq!(auto.zero_crossing, None);
    }

    #[test]
    fn default_range_stops_at_first_negative_lag() {
        let c = exact_cov(0.02, 300.0, 800);
        let fit = estimate_params(&c, FitRange::default()).unwrap();
        assert_eq!(fit.zero_crossing, Some(301));
        assert_eq!(fit.fit_range, (10, 300));
        assert!((fit.l_over_dt - 300.0).abs() < 1e-8);
    }

    #[test]
    fn flat_covariance_is_an_invalid_fit() {
        let mut c = exact_cov(0.0, 10.0, 100);
        c.cov.iter_mut().for_each(|v| *v = 0.0);
        assert!(matches!(estimate_params(&c, FitRange::default()), Err(Error::MrwFitInvalid(_))));
        let rising = exact_cov(-0.01, 10.0, 100);
        assert!(matches!(
            estimate_params(&rising, FitRange { lo: 10, hi: Some(100) }),
            Err(Error::MrwFitInvalid(_))
        ));
    }

    #[test]
    fn barely_decaying_covariance_does_not_overflow() {
        // slope -1e-6 with intercept 0.05 implies ln(L/dt) = 5e4
        let mut c = exact_cov(0.0, 10.0, 100);
        for (k, v) in c.lags.iter().zip(c.cov.iter_mut()) {
            *v = 0.05 - 1e-6 * (*k as f64).ln();
        }
        assert!(matches!(estimate_params(&c, FitRange::default()), Err(Error::MrwFitInvalid(_))));
        // large but representable lengths keep Var(omega) exact
        for (k, v) in c.lags.iter().zip(c.cov.iter_mut()) {
            *v = 0.05 - 1e-3 * (*k as f64).ln();
        }
        let fit = estimate_params(&c, FitRange::default()).unwrap();
        assert!((fit.ln_l_over_dt - 50.0).abs() < 1e-9);
        assert!((fit.var_omega() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn fit_range_is_validated() {
        let c = exact_cov(0.014, 1025.0, 100);
        assert!(estimate_params(&c, FitRange { lo: 10, hi: Some(101) }).is_err());
        assert!(estimate_params(&c, FitRange { lo: 0, hi: None }).is_err());
        assert!(matches!(
            estimate_params(&c, FitRange { lo: 10, hi: Some(15) }),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn long_l_estimate_warns() {
        let mut c = exact_cov(0.014, 1e6, 100);
        c.series_len = 1000;
        let fit = estimate_params(&c, FitRange::default()).unwrap();
        assert_eq!(fit.warnings.len(), 1);
    }

    #[test]
    fn zeta_fit_inverts_the_model() {
        let q = [1.0, 2.0, 3.0, 4.0, 5.0];
        let z: Vec<f64> = q.iter().map(|&q| zeta_model(q, 0.014)).collect();
        let f = fit_zeta_points(&q, &z).unwrap();
        assert!((f.lambda2 - 0.014).abs() < 1e-10);
        assert!(f.residual < 1e-12);
        assert!(!f.at_boundary);

        let brownian: Vec<f64> = q.iter().map(|q| q / 2.0).collect();
        let f = fit_zeta_points(&q, &brownian).unwrap();
        assert_eq!(f.lambda2, 0.0);
        assert!(f.at_boundary);

        // convex spectrum pins the estimate at zero
        let convex: Vec<f64> = q.iter().map(|&q| zeta_model(q, -0.02)).collect();
        let f = fit_zeta_points(&q, &convex).unwrap();
        assert_eq!(f.lambda2, 0.0);
        assert!(f.at_boundary && f.residual > 0.0);

        assert!(fit_zeta_points(&q[..2], &brownian[..2]).is_err());
        assert!(fit_zeta_points(&[2.0, 2.0, 2.0], &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn zeta_two_is_one_for_every_lambda() {
        for l in [0.0, 0.014, 0.05, 0.3] {
            assert_eq!(zeta_model(2.0, l), 1.0);
        }
    }

    #[test]
    fn default_scales_cover_ten_to_seven_hundred_minutes() {
        let s = default_scales(1);
        assert_eq!(s[0], 10);
        assert_eq!(*s.last().unwrap(), 700);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        let s5 = default_scales(5);
        assert_eq!((s5[0], *s5.last().unwrap()), (2, 140));
    }

    #[test]
    fn moment_scaling_preconditions() {
        let x = vec![1.0; 1000];
        assert!(moment_scaling(&x, &[1.0], &[1, 2]).is_err());
        assert!(moment_scaling(&x, &[1.0], &[1, 3, 2]).is_err());
        assert!(moment_scaling(&x, &[7.0], &[1, 2, 3]).is_err());
        assert!(moment_scaling(&x, &[1.0], &[1, 2, 60]).is_err());
        assert!(moment_scaling(&x, &[1.0, 2.0], &[1, 2, 4]).is_ok());
    }

    #[test]
    fn moment_scaling_of_linear_blocks() {
        // constant increments: |sum over s| = s, so zeta_q = q exactly
        let x = vec![0.5; 4000];
        let m = moment_scaling(&x, &[1.0, 2.0, 3.0], &[1, 2, 4, 8]).unwrap();
        for (q, z) in m.q.iter().zip(&m.zeta) {
            assert!((z - q).abs() < 1e-12);
        }
    }

    #[test]
    fn q2_slope_is_one_on_mrw() {
        let paths = simulate_many(&MrwParams::unit(1.0, 0.05, 1024.0), 1 << 16, 8, 21).unwrap();
        let refs: Vec<&[f64]> = paths.iter().map(|p| p.delta_x.as_slice()).collect();
        let m = moment_scaling_pooled(&refs, &[2.0], &default_scales(1)).unwrap();
        assert!((m.zeta[0] - 1.0).abs() < 0.05, "{}", m.zeta[0]);
    }
}
