//! Resonantly driven two-level emitter: fluorescence rate, power broadening,
//! spectral slope and inhomogeneously broadened (Voigt) lineshapes.
//!
//! Detuning is Δ = ω_emitter − ω_laser in rad/s.

use crate::error::{ensure, invalid, Result};
use crate::faddeeva::{voigt, voigt_fwhm};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Emitter {
    /// Spontaneous emission rate, s⁻¹.
    pub gamma_sp: f64,
    /// Pure dephasing rate, s⁻¹.
    pub gamma_star: f64,
    /// Gaussian inhomogeneous broadening (standard deviation), rad/s.
    pub sigma_inh: f64,
}

impl Emitter {
    pub fn new(gamma_sp: f64, gamma_star: f64, sigma_inh: f64) -> Result<Self> {
        let e = Emitter {
            gamma_sp,
            gamma_star,
            sigma_inh,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn transform_limited(gamma_sp: f64) -> Result<Self> {
        Self::new(gamma_sp, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.gamma_sp > 0.0 && self.gamma_sp.is_finite(), || {
            format!("gamma_sp must be positive, got {}", self.gamma_sp)
        })?;
        ensure(self.gamma_star >= 0.0 && self.gamma_star.is_finite(), || {
            format!("gamma_star must be non-negative, got {}", self.gamma_star)
        })?;
        ensure(self.sigma_inh >= 0.0 && self.sigma_inh.is_finite(), || {
            format!("sigma_inh must be non-negative, got {}", self.sigma_inh)
        })
    }

    /// Same emitter without the Gaussian broadening.
    pub fn homogeneous(&self) -> Emitter {
        Emitter {
            sigma_inh: 0.0,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveCondition {
    /// Rabi frequency Ω_R, rad/s.
    pub omega_r: f64,
    /// Laser–emitter detuning Δ, rad/s.
    pub detuning: f64,
}

impl DriveCondition {
    pub fn new(omega_r: f64, detuning: f64) -> Result<Self> {
        ensure(omega_r >= 0.0 && omega_r.is_finite(), || {
            format!("omega_r must be non-negative, got {omega_r}")
        })?;
        ensure(detuning.is_finite(), || "detuning must be finite".into())?;
        Ok(DriveCondition { omega_r, detuning })
    }

    pub fn at(self, detuning: f64) -> Self {
        DriveCondition { detuning, ..self }
    }
}

/// γ = γ_sp/2 + γ*.
pub fn total_decoherence(e: &Emitter) -> f64 {
    e.gamma_sp / 2.0 + e.gamma_star
}

/// Γ = √(γ² + (γ/γ_sp)·Ω_R²).
pub fn power_broadened_hwhm(e: &Emitter, omega_r: f64) -> f64 {
    let g = total_decoherence(e);
    (g * g + g / e.gamma_sp * omega_r * omega_r).sqrt()
}

fn lorentz_numerator(e: &Emitter, omega_r: f64) -> f64 {
    // (γ_sp/2)·(γ/γ_sp)·Ω_R²
    0.5 * total_decoherence(e) * omega_r * omega_r
}

/// Emitted photon rate Ṅ of the homogeneous line.
pub fn rf_rate(e: &Emitter, d: &DriveCondition) -> f64 {
    let gam = power_broadened_hwhm(e, d.omega_r);
    lorentz_numerator(e, d.omega_r) / (d.detuning * d.detuning + gam * gam)
}

/// α = ∂Ṅ/∂Δ of the homogeneous line.
pub fn rf_slope(e: &Emitter, d: &DriveCondition) -> f64 {
    let gam = power_broadened_hwhm(e, d.omega_r);
    let den = d.detuning * d.detuning + gam * gam;
    -rf_rate(e, d) * 2.0 * d.detuning / den
}

/// Ṅ of the homogeneous line convolved with the Gaussian broadening.
pub fn voigt_rate(e: &Emitter, d: &DriveCondition) -> f64 {
    if e.sigma_inh == 0.0 {
        return rf_rate(e, d);
    }
    let gam = power_broadened_hwhm(e, d.omega_r);
    lorentz_numerator(e, d.omega_r) * PI / gam * voigt(d.detuning, gam, e.sigma_inh).0
}

/// ∂/∂Δ of [`voigt_rate`].
pub fn voigt_slope(e: &Emitter, d: &DriveCondition) -> f64 {
    if e.sigma_inh == 0.0 {
        return rf_slope(e, d);
    }
    let gam = power_broadened_hwhm(e, d.omega_r);
    lorentz_numerator(e, d.omega_r) * PI / gam * voigt(d.detuning, gam, e.sigma_inh).1
}

/// Half width at half maximum of the broadened line, Γ_inh.
pub fn voigt_hwhm(e: &Emitter, omega_r: f64) -> f64 {
    0.5 * voigt_fwhm(power_broadened_hwhm(e, omega_r), e.sigma_inh)
}

/// Voigt lineshape as returned by a fit to a fluorescence scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineshapeParams {
    /// rad/s
    pub lorentzian_fwhm: f64,
    /// rad/s
    pub gaussian_fwhm: f64,
    /// Peak rate, counts/s.
    pub amplitude: f64,
    /// Line center, rad/s.
    pub center: f64,
}

impl LineshapeParams {
    pub fn new(lorentzian_fwhm: f64, gaussian_fwhm: f64, amplitude: f64, center: f64) -> Result<Self> {
        let p = LineshapeParams {
            lorentzian_fwhm,
            gaussian_fwhm,
            amplitude,
            center,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lorentzian_fwhm >= 0.0 && self.gaussian_fwhm >= 0.0) {
            return invalid("lineshape widths must be non-negative");
        }
        if self.lorentzian_fwhm == 0.0 && self.gaussian_fwhm == 0.0 {
            return invalid("lineshape widths cannot both be zero");
        }
        Ok(())
    }

    /// Lineshape of an emitter under a given drive, with the peak rate as amplitude.
    pub fn from_emitter(e: &Emitter, omega_r: f64) -> Self {
        let gam = power_broadened_hwhm(e, omega_r);
        LineshapeParams {
            lorentzian_fwhm: 2.0 * gam,
            gaussian_fwhm: FWHM_PER_SIGMA * e.sigma_inh,
            amplitude: voigt_rate(e, &DriveCondition { omega_r, detuning: 0.0 }),
            center: 0.0,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.gaussian_fwhm / FWHM_PER_SIGMA
    }

    fn profile(&self, x: f64) -> (f64, f64) {
        let hwhm = self.lorentzian_fwhm / 2.0;
        let sigma = self.sigma();
        if hwhm == 0.0 {
            let g = (-0.5 * x * x / (sigma * sigma)).exp();
            return (g, -x / (sigma * sigma) * g);
        }
        voigt(x, hwhm, sigma)
    }

    /// Count rate at detuning `delta`.
    pub fn rate(&self, delta: f64) -> f64 {
        let peak = self.profile(0.0).0;
        self.amplitude * self.profile(delta - self.center).0 / peak
    }

    /// ∂rate/∂Δ at detuning `delta`.
    pub fn slope(&self, delta: f64) -> f64 {
        let peak = self.profile(0.0).0;
        self.amplitude * self.profile(delta - self.center).1 / peak
    }

    /// α/Ṅ, independent of the amplitude.
    pub fn relative_slope(&self, delta: f64) -> f64 {
        let (v, dv) = self.profile(delta - self.center);
        dv / v
    }

    pub fn hwhm(&self) -> f64 {
        if self.lorentzian_fwhm == 0.0 {
            return self.gaussian_fwhm / 2.0;
        }
        0.5 * voigt_fwhm(self.lorentzian_fwhm / 2.0, self.sigma())
    }
}

/// Converts a Gaussian FWHM to its standard deviation.
pub fn sigma_from_fwhm(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}

/// Pure dephasing that yields a given homogeneous HWHM under drive `omega_r`.
pub fn gamma_star_for_hwhm(gamma_sp: f64, omega_r: f64, hwhm: f64) -> Result<f64> {
    // Γ² = γ² + γΩ²/γ_sp  ⇒  γ = (−Ω²/γ_sp + √(Ω⁴/γ_sp² + 4Γ²))/2
    let b = omega_r * omega_r / gamma_sp;
    let gamma = 0.5 * (-b + (b * b + 4.0 * hwhm * hwhm).sqrt());
    let gs = gamma - gamma_sp / 2.0;
    if gs < -1e-12 * gamma_sp {
        return invalid(format!(
            "half width {hwhm:.4e} rad/s is below the transform limit under this drive"
        ));
    }
    Ok(gs.max(0.0))
}
