//! Exact Gaussian transition of a thermally driven damped oscillator.
//!
//! For ẍ + γẋ + ω²x = ξ(t) with thermal forcing, the state (x, v) after a
//! step `h` is Gaussian with mean M(h)·(x, v) and covariance
//! Σ∞ − M Σ∞ Mᵀ, where Σ∞ = diag(k_BT/(mω²), k_BT/m). No discretization
//! error enters at any step size.

use super::rng::{substream, Stream};
use crate::error::{ensure, Result};
use crate::mechanics::MechMode;
use crate::units::K_B;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub m: [[f64; 2]; 2],
    /// Lower Cholesky factor (l11, l21, l22) of the step covariance.
    pub chol: [f64; 3],
}

impl Transition {
    pub fn new(omega: f64, gamma: f64, var_x: f64, var_v: f64, h: f64) -> Self {
        let wd = (omega * omega - 0.25 * gamma * gamma).sqrt();
        let e = (-0.5 * gamma * h).exp();
        let (s, c) = (wd * h).sin_cos();
        let k = 0.5 * gamma / wd;
        let m = [
            [e * (c + k * s), e * s / wd],
            [-e * omega * omega * s / wd, e * (c - k * s)],
        ];
        let s11 = var_x - (m[0][0] * m[0][0] * var_x + m[0][1] * m[0][1] * var_v);
        let s12 = -(m[0][0] * m[1][0] * var_x + m[0][1] * m[1][1] * var_v);
        let s22 = var_v - (m[1][0] * m[1][0] * var_x + m[1][1] * m[1][1] * var_v);
        let l11 = s11.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { s12 / l11 } else { 0.0 };
        let l22 = (s22 - l21 * l21).max(0.0).sqrt();
        Transition {
            m,
            chol: [l11, l21, l22],
        }
    }

    #[inline]
    pub fn apply(&self, state: [f64; 2], n1: f64, n2: f64) -> [f64; 2] {
        let [x, v] = state;
        [
            self.m[0][0] * x + self.m[0][1] * v + self.chol[0] * n1,
            self.m[1][0] * x + self.m[1][1] * v + self.chol[1] * n1 + self.chol[2] * n2,
        ]
    }
}

/// One mode's (x, v) state with its own random stream.
#[derive(Debug, Clone)]
pub struct Oscillator {
    omega: f64,
    gamma: f64,
    var_x: f64,
    var_v: f64,
    state: [f64; 2],
    rng: ChaCha8Rng,
}

impl Oscillator {
    /// Starts from a draw of the stationary distribution.
    pub fn thermal(mode: &MechMode, temperature: f64, seed: u64, stream: u32) -> Self {
        let mut osc = Self::at_rest(mode, temperature, seed, stream);
        let n1: f64 = osc.rng.sample(StandardNormal);
        let n2: f64 = osc.rng.sample(StandardNormal);
        osc.state = [osc.var_x.sqrt() * n1, osc.var_v.sqrt() * n2];
        osc
    }

    pub fn at_rest(mode: &MechMode, temperature: f64, seed: u64, stream: u32) -> Self {
        let kt = K_B * temperature.max(0.0);
        Oscillator {
            omega: mode.omega_m,
            gamma: mode.gamma_m,
            var_x: kt / (mode.m_eff * mode.omega_m * mode.omega_m),
            var_v: kt / mode.m_eff,
            state: [0.0, 0.0],
            rng: substream(seed, Stream::Mechanics(stream)),
        }
    }

    pub fn set_state(&mut self, x: f64, v: f64) {
        self.state = [x, v];
    }

    pub fn state(&self) -> [f64; 2] {
        self.state
    }

    pub fn transition(&self, h: f64) -> Transition {
        Transition::new(self.omega, self.gamma, self.var_x, self.var_v, h)
    }

    /// Advances by `h` seconds and returns the new displacement.
    pub fn advance(&mut self, h: f64) -> f64 {
        let t = self.transition(h);
        self.step_with(&t)
    }

    #[inline]
    pub fn step_with(&mut self, t: &Transition) -> f64 {
        let (n1, n2) = if self.var_x > 0.0 {
            (self.rng.sample(StandardNormal), self.rng.sample(StandardNormal))
        } else {
            (0.0, 0.0)
        };
        self.state = t.apply(self.state, n1, n2);
        self.state[0]
    }
}

/// Displacement sampled on a uniform grid starting at t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }
}

/// Checks the sampling and duration requirements for a set of modes.
pub fn check_grid(modes: &[&MechMode], duration: f64, dt: f64) -> Result<()> {
    ensure(duration > 0.0 && duration.is_finite(), || {
        format!("duration must be positive, got {duration}")
    })?;
    ensure(dt > 0.0, || format!("dt must be positive, got {dt}"))?;
    if modes.is_empty() {
        return Ok(());
    }
    let f_max = modes.iter().map(|m| m.freq_hz()).fold(0.0, f64::max);
    let f_min = modes.iter().map(|m| m.freq_hz()).fold(f64::INFINITY, f64::min);
    ensure(dt <= 0.05 / f_max * (1.0 + 1e-12), || {
        format!("dt = {dt:.3e} s is too coarse: must be at most 0.05/f_max = {:.3e} s", 0.05 / f_max)
    })?;
    ensure(duration >= 100.0 / f_min * (1.0 - 1e-12), || {
        format!(
            "duration = {duration:.3e} s is too short: must cover 100 periods ({:.3e} s)",
            100.0 / f_min
        )
    })
}

/// Brownian trajectory of one mode (stream 0 of `seed`).
pub fn simulate_displacement(
    mode: &MechMode,
    temperature: f64,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory> {
    simulate_displacement_stream(mode, temperature, duration, dt, seed, 0)
}

/// As [`simulate_displacement`], drawing from mechanics stream `stream`.
pub fn simulate_displacement_stream(
    mode: &MechMode,
    temperature: f64,
    duration: f64,
    dt: f64,
    seed: u64,
    stream: u32,
) -> Result<Trajectory> {
    mode.validate()?;
    ensure(temperature >= 0.0, || "temperature must be non-negative".into())?;
    check_grid(&[mode], duration, dt)?;
    let n = (duration / dt).round() as usize;
    let mut osc = Oscillator::thermal(mode, temperature, seed, stream);
    let tr = osc.transition(dt);
    let mut samples = Vec::with_capacity(n);
    samples.push(osc.state()[0]);
    for _ in 1..n {
        samples.push(osc.step_with(&tr));
    }
    Ok(Trajectory { dt, samples })
}
