//! Monte-Carlo generation of Brownian trajectories and photon records.
//!
//! The mechanics drive the emitter one way: δΔ(t) modulates the fluorescence
//! rate, photons are drawn as an inhomogeneous Poisson process gated by a
//! telegraph blinking process, then pass through an optional beam splitter
//! and the detector model. Antibunching is not realized event by event; it
//! lives in [`G2Model`].

mod detector;
mod g2model;
mod oscillator;
mod photons;
pub mod rng;
mod tags;

pub use detector::{apply_detector, hbt_split};
pub use g2model::{G2Model, MechanicalTerm};
pub use oscillator::{
    check_grid, simulate_displacement, simulate_displacement_stream, Oscillator, Trajectory,
    Transition,
};
pub use photons::{
    detuning_trace, generate_photons, ConstantDetuning, DetuningSource, DetuningTrace,
    ExactModes, RateModel, SampledDetuning,
};
pub use tags::{to_ps, PhotonTags, TimeTrace, PS};

use crate::emitter::{DriveCondition, Emitter};
use crate::error::{ensure, Result};
use crate::mechanics::MechMode;
use rng::derive_seed;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlinkingModel {
    /// Mean on fraction β.
    pub on_fraction: f64,
    /// Telegraph correlation time τ_b, s.
    pub correlation_time: f64,
}

impl BlinkingModel {
    pub fn none() -> Self {
        BlinkingModel {
            on_fraction: 1.0,
            correlation_time: 100e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.on_fraction > 0.0 && self.on_fraction <= 1.0, || {
            format!("blinking on fraction must lie in (0, 1], got {}", self.on_fraction)
        })?;
        ensure(self.correlation_time > 0.0, || "blinking correlation time must be positive".into())
    }
}

impl Default for BlinkingModel {
    fn default() -> Self {
        BlinkingModel {
            on_fraction: 0.1,
            correlation_time: 100e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Gaussian timing jitter σ, s.
    pub jitter_sigma: f64,
    /// s
    pub dead_time: f64,
    /// 1, or 2 for a beam-splitter (HBT) pair.
    pub channels: u8,
}

impl DetectorModel {
    pub fn ideal() -> Self {
        DetectorModel {
            jitter_sigma: 0.0,
            dead_time: 0.0,
            channels: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.jitter_sigma >= 0.0, || "jitter must be non-negative".into())?;
        ensure(self.dead_time >= 0.0, || "dead time must be non-negative".into())?;
        ensure(self.channels == 1 || self.channels == 2, || {
            format!("detector channels must be 1 or 2, got {}", self.channels)
        })
    }
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            jitter_sigma: 500e-12,
            dead_time: 100e-9,
            channels: 2,
        }
    }
}

/// A mode together with its coupling λ (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCoupling {
    pub mode: MechMode,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub modes: Vec<ModeCoupling>,
    pub emitter: Emitter,
    pub drive: DriveCondition,
    pub efficiency: f64,
    /// K
    pub temperature: f64,
    pub blinking: BlinkingModel,
    pub detector: DetectorModel,
    /// s
    pub duration: f64,
    /// Sampling step of stored trajectories, s.
    pub dt: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.emitter.validate()?;
        self.blinking.validate()?;
        self.detector.validate()?;
        ensure(self.efficiency > 0.0 && self.efficiency <= 1.0, || {
            format!("efficiency must lie in (0, 1], got {}", self.efficiency)
        })?;
        ensure(self.temperature >= 0.0, || "temperature must be non-negative".into())?;
        for mc in &self.modes {
            mc.mode.validate()?;
            ensure(mc.lambda >= 0.0, || format!("mode {}: lambda must be non-negative", mc.mode.label))?;
        }
        let modes: Vec<&MechMode> = self.modes.iter().map(|m| &m.mode).collect();
        check_grid(&modes, self.duration, self.dt)
    }

    /// Largest `dt` allowed by the sampling rule for these modes.
    pub fn max_dt(modes: &[ModeCoupling]) -> f64 {
        let f_max = modes.iter().map(|m| m.mode.freq_hz()).fold(0.0, f64::max);
        if f_max > 0.0 {
            0.05 / f_max
        } else {
            1e-6
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).into()
    }

    /// Full pipeline: exact event-driven emission, optional beam splitter, detectors.
    pub fn run(&self) -> Result<PhotonTags> {
        self.validate()?;
        let mut source = ExactModes::new(&self.modes, self.temperature, self.seed);
        self.finish(&mut source)
    }

    /// Same pipeline, but the mechanics are first sampled on the `dt` grid
    /// and interpolated. Memory grows with duration/dt.
    pub fn run_sampled(&self) -> Result<PhotonTags> {
        self.validate()?;
        let trajectories = self
            .modes
            .iter()
            .enumerate()
            .map(|(k, mc)| {
                simulate_displacement_stream(&mc.mode, self.temperature, self.duration, self.dt, self.seed, k as u32)
            })
            .collect::<Result<Vec<_>>>()?;
        let trace = if self.modes.is_empty() {
            DetuningTrace {
                dt: self.dt,
                values: vec![0.0],
            }
        } else {
            let parts: Vec<_> = trajectories.iter().zip(&self.modes).collect();
            detuning_trace(&parts)?
        };
        self.finish(&mut trace.source())
    }

    fn finish<S: DetuningSource>(&self, source: &mut S) -> Result<PhotonTags> {
        let mut tags = generate_photons(
            source,
            &self.emitter,
            &self.drive,
            self.efficiency,
            &self.blinking,
            self.duration,
            self.seed,
        )?;
        if self.detector.channels == 2 {
            tags = hbt_split(&tags, self.seed)?;
        }
        let mut out = apply_detector(&tags, &self.detector, self.seed)?;
        out.digest = self.digest();
        Ok(out)
    }

    /// Copy with a different seed derived from this one.
    pub fn reseeded(&self, index: u64) -> Self {
        SimConfig {
            seed: derive_seed(self.seed, index),
            ..self.clone()
        }
    }
}
