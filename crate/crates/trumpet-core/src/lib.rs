//! Displacement read-out of a mechanical resonator through the resonance
//! fluorescence of an embedded two-level emitter.
//!
//! The crate is split along the measurement chain:
//!
//! * [`emitter`]: closed-form fluorescence rate, slope and Voigt lineshapes.
//! * [`mechanics`]: mode catalog, zero-point/thermal amplitudes, strain maps.
//! * [`noisebudget`]: imprecision, back-action and thermal noise theory.
//! * [`simulator`]: Brownian trajectories and synthetic photon records.
//! * [`analysis`]: spectra, correlations, coupling extraction, localization.
//!
//! All angular quantities are in rad/s. Inputs quoted "over 2π" are converted
//! once at ingestion (see [`units`]).

pub mod analysis;
pub mod emitter;
pub mod error;
pub mod faddeeva;
pub mod mechanics;
pub mod noisebudget;
pub mod optimize;
pub mod presets;
pub mod simulator;
pub mod units;

pub use error::{Error, Result};
