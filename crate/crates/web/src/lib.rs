//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Three operations: simulate an MRW path, fit the log-volatility covariance
//! of a path, and compare its moment-scaling exponents with the model.

pub mod demo;

use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Simulation(demo::Simulation);

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(getter)]
    pub fn delta_x(&self) -> Vec<f64> {
        self.0.delta_x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn omega(&self) -> Vec<f64> {
        self.0.omega.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn log_price(&self) -> Vec<f64> {
        self.0.log_price.clone()
    }
}

#[wasm_bindgen]
pub fn simulate(sigma: f64, lambda2: f64, l_over_dt: f64, len: usize, seed: u32) -> Result<Simulation, JsError> {
    demo::run_simulation(sigma, lambda2, l_over_dt, len, seed as u64)
        .map(Simulation)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct CovFit(demo::CovFit);

#[wasm_bindgen]
impl CovFit {
    #[wasm_bindgen(getter)]
    pub fn lags(&self) -> Vec<f64> {
        self.0.lags.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn cov(&self) -> Vec<f64> {
        self.0.cov.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn fitted(&self) -> Vec<f64> {
        self.0.fitted.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn lambda2(&self) -> f64 {
        self.0.lambda2
    }

    #[wasm_bindgen(getter)]
    pub fn l_over_dt(&self) -> f64 {
        self.0.l_over_dt
    }

    #[wasm_bindgen(getter)]
    pub fn var_omega(&self) -> f64 {
        self.0.var_omega
    }

    #[wasm_bindgen(getter)]
    pub fn r2(&self) -> f64 {
        self.0.r2
    }

    #[wasm_bindgen(getter)]
    pub fn fit_lo(&self) -> usize {
        self.0.fit_lo
    }

    #[wasm_bindgen(getter)]
    pub fn fit_hi(&self) -> usize {
        self.0.fit_hi
    }
}

/// `fit_hi = 0` stops at the first negative covariance.
#[wasm_bindgen]
pub fn fit_covariance(series: &[f64], max_lag: usize, fit_lo: usize, fit_hi: usize) -> Result<CovFit, JsError> {
    demo::run_cov_fit(series, max_lag, fit_lo, fit_hi)
        .map(CovFit)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct Spectrum(demo::Spectrum);

#[wasm_bindgen]
impl Spectrum {
    #[wasm_bindgen(getter)]
    pub fn q(&self) -> Vec<f64> {
        self.0.q.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn empirical(&self) -> Vec<f64> {
        self.0.empirical.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn model(&self) -> Vec<f64> {
        self.0.model.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn fitted_lambda2(&self) -> f64 {
        self.0.fitted_lambda2
    }
}

#[wasm_bindgen]
pub fn zeta_spectrum(series: &[f64], lambda2: f64) -> Result<Spectrum, JsError> {
    demo::run_spectrum(series, lambda2)
        .map(Spectrum)
        .map_err(|e| JsError::new(&e))
}
