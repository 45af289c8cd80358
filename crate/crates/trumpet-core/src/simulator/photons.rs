//! Photon emission driven by the mechanical detuning, with blinking.
//!
//! Events are drawn by thinning a homogeneous Poisson process at the peak
//! detected rate. Blinking and the mechanics are sampled only at candidate
//! times, each through its exact Markov transition, so arbitrarily long
//! records need no stored grid.

use super::oscillator::{Oscillator, Trajectory};
use super::rng::{substream, Stream};
use super::tags::{to_ps, PhotonTags};
use super::{BlinkingModel, ModeCoupling};
use crate::emitter::{power_broadened_hwhm, total_decoherence, DriveCondition, Emitter};
use crate::error::{ensure, invalid, Result};
use crate::faddeeva::voigt;
use crate::mechanics::zero_point;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Detuning offset δΔ(t) in rad/s, queried at non-decreasing times.
pub trait DetuningSource {
    fn offset_at(&mut self, t: f64) -> f64;
}

/// δΔ sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningTrace {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl DetuningTrace {
    pub fn duration(&self) -> f64 {
        self.dt * self.values.len() as f64
    }

    pub fn source(&self) -> SampledDetuning<'_> {
        SampledDetuning { trace: self }
    }
}

/// Linear interpolation of a [`DetuningTrace`]; held constant past the end.
pub struct SampledDetuning<'a> {
    trace: &'a DetuningTrace,
}

impl DetuningSource for SampledDetuning<'_> {
    fn offset_at(&mut self, t: f64) -> f64 {
        let v = &self.trace.values;
        if v.is_empty() {
            return 0.0;
        }
        let x = (t / self.trace.dt).max(0.0);
        let i = x.floor() as usize;
        if i + 1 >= v.len() {
            return v[v.len() - 1];
        }
        let f = x - i as f64;
        v[i] * (1.0 - f) + v[i + 1] * f
    }
}

/// Constant offset.
pub struct ConstantDetuning(pub f64);

impl DetuningSource for ConstantDetuning {
    fn offset_at(&mut self, _t: f64) -> f64 {
        self.0
    }
}

/// Thermal modes propagated exactly to each query time.
pub struct ExactModes {
    oscillators: Vec<Oscillator>,
    gains: Vec<f64>,
    t: f64,
}

impl ExactModes {
    /// Mode `k` draws from mechanics stream `k` of `seed`.
    pub fn new(modes: &[ModeCoupling], temperature: f64, seed: u64) -> Self {
        ExactModes {
            oscillators: modes
                .iter()
                .enumerate()
                .map(|(k, mc)| Oscillator::thermal(&mc.mode, temperature, seed, k as u32))
                .collect(),
            gains: modes.iter().map(|mc| mc.lambda / zero_point(&mc.mode)).collect(),
            t: 0.0,
        }
    }
}

impl DetuningSource for ExactModes {
    fn offset_at(&mut self, t: f64) -> f64 {
        let h = t - self.t;
        let mut sum = 0.0;
        for (osc, g) in self.oscillators.iter_mut().zip(&self.gains) {
            let x = if h > 0.0 { osc.advance(h) } else { osc.state()[0] };
            sum += g * x;
        }
        if h > 0.0 {
            self.t = t;
        }
        sum
    }
}

/// δΔ(t) = Σ_k λ_k·u_k(t)/u_zpf,k on a shared grid.
pub fn detuning_trace(parts: &[(&Trajectory, &ModeCoupling)]) -> Result<DetuningTrace> {
    let Some((first, _)) = parts.first() else {
        return invalid("detuning trace needs at least one trajectory");
    };
    let n = first.samples.len();
    let dt = first.dt;
    for (tr, _) in parts {
        ensure(tr.samples.len() == n && (tr.dt - dt).abs() <= 1e-12 * dt, || {
            "trajectories are on different time grids".into()
        })?;
    }
    let mut values = vec![0.0; n];
    for (tr, mc) in parts {
        let g = mc.lambda / zero_point(&mc.mode);
        if g == 0.0 {
            continue;
        }
        for (v, x) in values.iter_mut().zip(&tr.samples) {
            *v += g * x;
        }
    }
    Ok(DetuningTrace { dt, values })
}

/// Fluorescence rate Ṅ(Δ) of the emitter (Voigt when inhomogeneously broadened),
/// with drive-dependent constants precomputed.
#[derive(Debug, Clone, Copy)]
pub struct RateModel {
    scale: f64,
    hwhm: f64,
    sigma: f64,
}

impl RateModel {
    pub fn new(e: &Emitter, omega_r: f64) -> Self {
        let hwhm = power_broadened_hwhm(e, omega_r);
        let k = 0.5 * total_decoherence(e) * omega_r * omega_r;
        RateModel {
            scale: k * PI / hwhm,
            hwhm,
            sigma: e.sigma_inh,
        }
    }

    #[inline]
    pub fn rate(&self, delta: f64) -> f64 {
        self.scale * voigt(delta, self.hwhm, self.sigma).0
    }

    /// Largest rate, reached at line center.
    pub fn peak(&self) -> f64 {
        self.rate(0.0)
    }
}

/// Ideal single-channel detection record.
pub fn generate_photons<S: DetuningSource>(
    source: &mut S,
    emitter: &Emitter,
    drive: &DriveCondition,
    efficiency: f64,
    blinking: &BlinkingModel,
    duration: f64,
    seed: u64,
) -> Result<PhotonTags> {
    emitter.validate()?;
    blinking.validate()?;
    ensure(efficiency > 0.0 && efficiency <= 1.0, || {
        format!("efficiency must lie in (0, 1], got {efficiency}")
    })?;
    ensure(duration > 0.0, || "duration must be positive".into())?;
    let model = RateModel::new(emitter, drive.omega_r);
    let bound = efficiency * model.peak();
    let mut tags = PhotonTags::empty(1, to_ps(duration), [0u8; 32]);
    if bound <= 0.0 {
        return Ok(tags);
    }
    let mut thin = substream(seed, Stream::Thinning);
    let mut blink = substream(seed, Stream::Blinking);
    let gap = Exp::new(bound).expect("positive rate");
    let beta = blinking.on_fraction;
    let mut on = beta >= 1.0 || blink.random::<f64>() < beta;
    let mut t_blink = 0.0;
    let mut t = 0.0;
    let mut last_ps: Option<u64> = None;
    loop {
        t += gap.sample(&mut thin);
        if t > duration {
            break;
        }
        let u: f64 = thin.random();
        if beta < 1.0 {
            let decay = (-(t - t_blink) / blinking.correlation_time).exp();
            let p_on = beta + (if on { 1.0 } else { 0.0 } - beta) * decay;
            on = blink.random::<f64>() < p_on;
            t_blink = t;
        }
        if !on {
            continue;
        }
        let delta = drive.detuning + source.offset_at(t);
        if u * bound < efficiency * model.rate(delta) {
            let ps = to_ps(t);
            if last_ps != Some(ps) {
                tags.push(ps, 0);
                last_ps = Some(ps);
            }
        }
    }
    Ok(tags)
}
