//! Uplink and downlink massive-MIMO simulation with sub-connected hybrid
//! analog/digital processing.
//!
//! The crate pairs a Monte Carlo rate engine (ground truth) with closed-form
//! approximations of the per-user ergodic rate for pure analog detection and
//! for MRC/ZF hybrid detection, the SNR thresholds at which the schemes swap
//! order, and Monte Carlo checks of the moment identities behind those
//! approximations.
//!
//! Module map:
//!
//! - [`system`]: configuration, channel matrices, Rayleigh and geometric mmWave channels.
//! - [`beamform`]: sub-connected analog combiner, effective channel, digital combiners, downlink precoders.
//! - [`rate`]: per-realization SINR and Monte Carlo ergodic rates.
//! - [`closed_form`]: analytical rates, rate gaps and thresholds.
//! - [`moments`]: Monte Carlo verification of the moment identities.
//! - [`sweep`]: parameter sweeps, presets and CSV output used by the CLI.

pub mod beamform;
pub mod closed_form;
pub mod error;
pub mod moments;
pub mod rate;
pub mod stats;
pub mod stream;
pub mod sweep;
pub mod system;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Linear power ratio from decibels.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Decibels from a linear power ratio.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Largest entry modulus, the max norm used by the structural checks.
pub fn max_modulus(m: &CMatrix) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}
