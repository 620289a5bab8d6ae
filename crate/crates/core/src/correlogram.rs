//! Sample auto- and cross-correlation functions with the white-noise
//! significance band `±1.96/√n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlogram {
    pub lags: Vec<i64>,
    pub values: Vec<f64>,
    /// Half-width of the 95% band under the white-noise null.
    pub band: f64,
}

impl Correlogram {
    pub fn at(&self, lag: i64) -> Option<f64> {
        self.lags.iter().position(|&l| l == lag).map(|i| self.values[i])
    }
}

fn centered(xs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = stats::mean(xs);
    let c: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let ss: f64 = c.iter().map(|x| x * x).sum();
    if !(ss.is_finite() && ss > 0.0) {
        return Err(Error::invalid("series is constant or non-finite"));
    }
    Ok((c, ss))
}

/// `r(k) = sum_t (x_t - m)(x_{t+k} - m) / sum_t (x_t - m)^2` for `k = 0..=max_lag`.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Correlogram> {
    let n = series.len();
    if n <= max_lag + 2 {
        return Err(Error::TooFewPoints {
            needed: max_lag + 3,
            got: n,
        });
    }
    let (c, ss) = centered(series)?;
    let mut values = Vec::with_capacity(max_lag + 1);
    values.push(1.0);
    for k in 1..=max_lag {
        let s: f64 = c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum();
        values.push(s / ss);
    }
    Ok(Correlogram {
        lags: (0..=max_lag as i64).collect(),
        values,
        band: 1.96 / (n as f64).sqrt(),
    })
}

/// `r_ab(k) = sum_t (a_t - ma)(b_{t+k} - mb) / sqrt(SS_a SS_b)` for
/// `k = -max_lag..=max_lag`. A positive peak lag means `b` follows `a`.
pub fn ccf(a: &[f64], b: &[f64], max_lag: usize) -> Result<Correlogram> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "series lengths differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n <= 2 * max_lag {
        return Err(Error::TooFewPoints {
            needed: 2 * max_lag + 1,
            got: n,
        });
    }
    let (ca, ssa) = centered(a)?;
    let (cb, ssb) = centered(b)?;
    let norm = (ssa * ssb).sqrt();
    let m = max_lag as i64;
    let mut lags = Vec::with_capacity(2 * max_lag + 1);
    let mut values = Vec::with_capacity(2 * max_lag + 1);
    for k in -m..=m {
        let s: f64 = if k >= 0 {
            let k = k as usize;
            ca[..n - k].iter().zip(&cb[k..]).map(|(x, y)| x * y).sum()
        } else {
            let k = (-k) as usize;
            ca[k..].iter().zip(&cb[..n - k]).map(|(x, y)| x * y).sum()
        };
        lags.push(k);
        values.push(s / norm);
    }
    Ok(Correlogram {
        lags,
        values,
        band: 1.96 / (n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::task_rng(seed, 0);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn lag_zero_is_one() {
        let x = noise(50, 1);
        assert_eq!(acf(&x, 5).unwrap().values[0], 1.0);
        assert!((ccf(&x, &x, 5).unwrap().at(0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn white_noise_stays_inside_band() {
        let x = noise(1000, 2);
        let r = acf(&x, 40).unwrap();
        let inside = r.values[1..].iter().filter(|v| v.abs() <= r.band).count();
        assert!(inside as f64 >= 0.95 * 40.0 - 1.0, "{inside} of 40 inside");
    }

    #[test]
    fn ar1_matches_geometric_decay() {
        let n = 20_000;
        let phi: f64 = 0.9;
        let e = noise(n, 3);
        let mut x = vec![0.0; n];
        for t in 1..n {
            x[t] = phi * x[t - 1] + e[t];
        }
        let r = acf(&x, 10).unwrap();
        for k in 1..=10 {
            let rho = phi.powi(k as i32);
            // Bartlett variance for AR(1)
            let var = ((1.0 + phi * phi) * (1.0 - rho * rho) / (1.0 - phi * phi) - 2.0 * k as f64 * rho * rho) / n as f64;
            assert!((r.values[k] - rho).abs() < 3.0 * var.sqrt(), "lag {k}: {}", r.values[k]);
        }
    }

    #[test]
    fn shifted_copy_peaks_at_shift() {
        let n = 500;
        let k = 7;
        let a = noise(n, 4);
        let mut b = vec![0.0; n];
        b[k..].copy_from_slice(&a[..n - k]);
        let r = ccf(&a, &b, 20).unwrap();
        let (best, _) = r
            .values
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .unwrap();
        assert_eq!(r.lags[best], k as i64);
        assert!(r.values[best] > 0.95);
    }

    #[test]
    fn independent_pair_is_small() {
        let n = 2000;
        let (a, b) = (noise(n, 5), noise(n, 6));
        let r = ccf(&a, &b, 30).unwrap();
        let bound = 3.0 / (n as f64).sqrt();
        let within = r.values.iter().filter(|v| v.abs() < bound).count();
        assert!(within as f64 >= 0.99 * r.values.len() as f64 - 1.0);
    }

    #[test]
    fn preconditions() {
        assert!(acf(&[1.0, 2.0, 3.0], 1).is_err());
        assert!(acf(&[1.0; 10], 2).is_err());
        assert!(ccf(&[1.0, 2.0], &[1.0], 0).is_err());
        assert!(ccf(&noise(10, 1), &noise(10, 2), 5).is_err());
    }
}
