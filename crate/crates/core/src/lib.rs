//! Market-wide co-movement analysis of intraday equity returns.
//!
//! The pipeline runs from minute bars to a de-seasonalized return panel
//! ([`panel`]), through windowed correlation matrices and their leading
//! eigenpair, the market mode ([`comovement`]), to multifractal random walk
//! estimation on the market-mode series ([`mrw`]) and a sliding-window
//! log-volatility variance indicator compared against crash days
//! ([`precursor`]). The MRW simulator doubles as ground truth for the
//! estimators.

pub mod circulant;
pub mod comovement;
pub mod correlogram;
pub mod eigen;
pub mod error;
pub mod mrw;
pub mod panel;
mod parallel;
pub mod precursor;
pub mod rng;
pub mod stats;
pub mod time;

pub use error::{Error, Result};
