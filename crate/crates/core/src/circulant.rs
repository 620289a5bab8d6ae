//! Exact sampling of stationary Gaussian sequences by circulant embedding.
//!
//! The Toeplitz covariance of the requested length is embedded in a
//! circulant matrix of size `M` (a power of two). Its eigenvalues are the DFT
//! of the first row; when they are all non-negative, `Re FFT(sqrt(ev/M) Z)`
//! with complex standard normal `Z` has exactly the target covariance.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Largest embedding the sampler will ever try.
pub const MAX_EMBEDDING: usize = 1 << 27;

/// Number of times the embedding may be doubled after the first attempt.
pub const MAX_DOUBLINGS: u32 = 4;

/// Relative size below which negative circulant eigenvalues count as round-off.
const NEGATIVE_TOL: f64 = 1e-9;

pub struct CirculantSampler {
    len: usize,
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("len", &self.len)
            .field("embedding", &self.scale.len())
            .finish()
    }
}

impl CirculantSampler {
    /// `acov(k)` is the autocovariance at lag `k`. When `support` is given the
    /// covariance must vanish for all lags `>= support`, which permits a
    /// smaller embedding than the generic `2 (len - 1)`.
    pub fn new(acov: impl Fn(usize) -> f64, len: usize, support: Option<usize>) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("cannot sample an empty sequence"));
        }
        let needed = match support {
            Some(s) => (2 * s).max(len + s),
            None => 2 * len.saturating_sub(1),
        }
        .max(2);
        let mut size = needed.next_power_of_two();
        let cap = (size << MAX_DOUBLINGS).min(MAX_EMBEDDING).max(size);
        let mut planner = FftPlanner::new();
        loop {
            let fft = planner.plan_fft_forward(size);
            let mut row: Vec<Complex64> = (0..size)
                .map(|j| Complex64::new(acov(j.min(size - j)), 0.0))
                .collect();
            fft.process(&mut row);
            let top = row.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
            let worst = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
            if worst >= -NEGATIVE_TOL * top.max(f64::MIN_POSITIVE) {
                let m = size as f64;
                let scale = row.iter().map(|c| (c.re.max(0.0) / m).sqrt()).collect();
                return Ok(CirculantSampler { len, scale, fft });
            }
            if size >= cap {
                return Err(Error::EmbeddingFailed { size, worst });
            }
            size *= 2;
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn embedding_size(&self) -> usize {
        self.scale.len()
    }

    /// One zero-mean draw of length `len`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut buf: Vec<Complex64> = self
            .scale
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buf);
        buf[..self.len].iter().map(|c| c.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_sizes() {
        let s = CirculantSampler::new(|k| if k == 0 { 1.0 } else { 0.0 }, 1000, Some(1)).unwrap();
        assert_eq!(s.embedding_size(), 1024);
        let s = CirculantSampler::new(|k| 0.5f64.powi(k as i32), 1000, None).unwrap();
        assert_eq!(s.embedding_size(), 2048);
    }

    #[test]
    fn ar1_covariance_is_reproduced() {
        let phi: f64 = 0.6;
        let s = CirculantSampler::new(|k| phi.powi(k as i32), 64, None).unwrap();
        let mut rng = crate::rng::task_rng(11, 0);
        let reps = 4000;
        let mut c0 = 0.0;
        let mut c1 = 0.0;
        let mut c3 = 0.0;
        for _ in 0..reps {
            let x = s.sample(&mut rng);
            c0 += x[10] * x[10];
            c1 += x[10] * x[11];
            c3 += x[40] * x[43];
        }
        let r = reps as f64;
        assert!((c0 / r - 1.0).abs() < 0.08);
        assert!((c1 / r - 0.6).abs() < 0.08);
        assert!((c3 / r - 0.216).abs() < 0.08);
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        // not a valid autocovariance: |c(1)| > c(0)
        let err = CirculantSampler::new(|k| if k == 0 { 1.0 } else if k == 1 { 1.5 } else { 0.0 }, 8, Some(2))
            .unwrap_err();
        assert!(matches!(err, Error::EmbeddingFailed { .. }));
    }
}
