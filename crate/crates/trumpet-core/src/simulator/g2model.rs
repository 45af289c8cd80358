//! Analytic intensity correlation g²(τ) of a blinking, mechanically
//! modulated two-level emitter seen through jittery detectors.

use super::{BlinkingModel, ModeCoupling};
use crate::emitter::{voigt_rate, voigt_slope, DriveCondition, Emitter};
use crate::mechanics::{thermal_rms, zero_point};
use serde::{Deserialize, Serialize};

/// Mechanical term c·cos(ωτ)·exp(−γ|τ|/2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanicalTerm {
    pub omega: f64,
    pub damping: f64,
    /// Relative modulation power c_k.
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Model {
    pub gamma_sp: f64,
    pub omega_r: f64,
    pub blinking: BlinkingModel,
    pub mechanics: Vec<MechanicalTerm>,
    /// Single-detector jitter σ, s. The pair difference has σ√2.
    pub jitter_sigma: f64,
}

impl G2Model {
    /// Builds the model at an operating point; c_k = (α/Ṅ·λ_k·u_th,k/u_zpf,k)².
    pub fn at_operating_point(
        emitter: &Emitter,
        drive: &DriveCondition,
        blinking: &BlinkingModel,
        modes: &[ModeCoupling],
        temperature: f64,
        jitter_sigma: f64,
    ) -> Self {
        let g = voigt_slope(emitter, drive) / voigt_rate(emitter, drive);
        let mechanics = modes
            .iter()
            .map(|mc| {
                let r = thermal_rms(&mc.mode, temperature) / zero_point(&mc.mode);
                MechanicalTerm {
                    omega: mc.mode.omega_m,
                    damping: mc.mode.gamma_m,
                    power: (g * mc.lambda * r).powi(2),
                }
            })
            .collect();
        G2Model {
            gamma_sp: emitter.gamma_sp,
            omega_r: drive.omega_r,
            blinking: *blinking,
            mechanics,
            jitter_sigma,
        }
    }

    /// Resonance-fluorescence antibunching kernel.
    pub fn two_level(&self, tau: f64) -> f64 {
        let t = tau.abs();
        let a = 0.75 * self.gamma_sp;
        let q = self.omega_r * self.omega_r - (0.25 * self.gamma_sp).powi(2);
        let (c, s_over_mu) = if q > 0.0 {
            let mu = q.sqrt();
            ((mu * t).cos(), (mu * t).sin() / mu)
        } else if q < 0.0 {
            let k = (-q).sqrt();
            ((k * t).cosh(), (k * t).sinh() / k)
        } else {
            (1.0, t)
        };
        1.0 - (-a * t).exp() * (c + a * s_over_mu)
    }

    pub fn blinking_factor(&self, tau: f64) -> f64 {
        let b = self.blinking.on_fraction;
        1.0 + (1.0 - b) / b * (-tau.abs() / self.blinking.correlation_time).exp()
    }

    pub fn mechanical_factor(&self, tau: f64) -> f64 {
        1.0 + self
            .mechanics
            .iter()
            .map(|m| m.power * (m.omega * tau).cos() * (-0.5 * m.damping * tau.abs()).exp())
            .sum::<f64>()
    }

    /// g² without detector jitter.
    pub fn ideal(&self, tau: f64) -> f64 {
        self.two_level(tau) * self.blinking_factor(tau) * self.mechanical_factor(tau)
    }

    /// g² convolved with the Gaussian timing response of width σ√2.
    pub fn eval(&self, tau: f64) -> f64 {
        if self.jitter_sigma == 0.0 {
            return self.ideal(tau);
        }
        let s = self.jitter_sigma * 2f64.sqrt();
        // Composite Simpson over ±8σ.
        let n = 800;
        let h = 16.0 * s / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let x = -8.0 * s + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let g = (-0.5 * (x / s).powi(2)).exp();
            acc += w * g * self.ideal(tau - x);
        }
        acc * h / 3.0 / (s * (2.0 * std::f64::consts::PI).sqrt())
    }
}
