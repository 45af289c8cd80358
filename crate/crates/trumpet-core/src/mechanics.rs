//! Mechanical modes: zero-point and thermal amplitudes, susceptibility,
//! analytic strain maps and deformation-potential coupling.
//!
//! Strain anchors are given per unit *thermal* displacement at a reference
//! point (r₀, φ₀) in the emitter plane. Flexural modes scale with the signed
//! distance from their neutral plane, breathing modes are uniform.

use crate::error::{ensure, invalid, Error, Result};
use crate::units::{hz, K_B, EV, HBAR};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::ops::{Add, Mul};

/// Default cross-section radius of the wire at the emitter plane, m.
pub const DEFAULT_RADIUS: f64 = 150e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeFamily {
    FlexuralX,
    FlexuralY,
    Breathing,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StrainTensor {
    pub e_zz: f64,
    pub e_xx: f64,
    pub e_yy: f64,
}

impl StrainTensor {
    pub fn new(e_zz: f64, e_xx: f64, e_yy: f64) -> Self {
        StrainTensor { e_zz, e_xx, e_yy }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn hydrostatic(&self) -> f64 {
        self.e_xx + self.e_yy + self.e_zz
    }

    pub fn shear(&self) -> f64 {
        2.0 * self.e_zz - self.e_xx - self.e_yy
    }

    /// Largest deviation from uniaxial strain, |e_ii + ν·e_zz|/|e_zz|.
    pub fn uniaxial_deviation(&self, nu: f64) -> f64 {
        let a = (self.e_xx + nu * self.e_zz).abs();
        let b = (self.e_yy + nu * self.e_zz).abs();
        a.max(b) / self.e_zz.abs()
    }
}

impl Add for StrainTensor {
    type Output = StrainTensor;
    fn add(self, o: StrainTensor) -> StrainTensor {
        StrainTensor::new(self.e_zz + o.e_zz, self.e_xx + o.e_xx, self.e_yy + o.e_yy)
    }
}

impl Mul<f64> for StrainTensor {
    type Output = StrainTensor;
    fn mul(self, k: f64) -> StrainTensor {
        StrainTensor::new(self.e_zz * k, self.e_xx * k, self.e_yy * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrainAnchor {
    pub r: f64,
    pub phi: f64,
    pub tensor: StrainTensor,
}

/// Emitter position in the wire cross-section, folded into the first quadrant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QDPosition {
    /// Distance from the wire axis, m.
    pub r: f64,
    /// Angle from the x axis, rad, in [0, π/2].
    pub phi: f64,
}

impl QDPosition {
    pub fn new(r: f64, phi: f64) -> Result<Self> {
        ensure(r >= 0.0 && r.is_finite(), || format!("r must be non-negative, got {r}"))?;
        ensure((0.0..=FRAC_PI_2).contains(&phi), || {
            format!("phi must lie in [0, pi/2], got {phi}")
        })?;
        Ok(QDPosition { r, phi })
    }

    /// Folds an arbitrary angle into the canonical quadrant; the measurement
    /// cannot tell the sign of either coordinate.
    pub fn canonical(r: f64, phi: f64) -> Result<Self> {
        let folded = phi.sin().abs().atan2(phi.cos().abs());
        Self::new(r, folded)
    }

    pub fn degrees(r_nm: f64, phi_deg: f64) -> Result<Self> {
        Self::new(r_nm * 1e-9, phi_deg.to_radians())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformationPotentials {
    /// Hydrostatic potential, eV.
    pub a: f64,
    /// Shear potential, eV.
    pub b: f64,
    /// Poisson ratio.
    pub nu: f64,
}

impl Default for DeformationPotentials {
    fn default() -> Self {
        DeformationPotentials {
            a: -8.33,
            b: -2.0,
            nu: 0.31,
        }
    }
}

impl DeformationPotentials {
    pub fn validate(&self) -> Result<()> {
        ensure(self.nu > 0.0 && self.nu < 0.5, || {
            format!("Poisson ratio must lie in (0, 0.5), got {}", self.nu)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechMode {
    pub label: String,
    pub family: ModeFamily,
    pub order: u32,
    /// rad/s
    pub omega_m: f64,
    /// Energy damping rate, rad/s.
    pub gamma_m: f64,
    /// kg
    pub m_eff: f64,
    pub anchor: StrainAnchor,
    /// m
    pub cross_section_radius: f64,
}

impl MechMode {
    /// A mode without strain information (unit breathing anchor).
    pub fn simple(label: &str, omega_m: f64, gamma_m: f64, m_eff: f64) -> Result<Self> {
        let mode = MechMode {
            label: label.to_string(),
            family: ModeFamily::Breathing,
            order: 1,
            omega_m,
            gamma_m,
            m_eff,
            anchor: StrainAnchor {
                r: 0.0,
                phi: 0.0,
                tensor: StrainTensor::zero(),
            },
            cross_section_radius: DEFAULT_RADIUS,
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.label;
        ensure(self.omega_m > 0.0 && self.omega_m.is_finite(), || {
            format!("mode {l}: frequency must be positive")
        })?;
        ensure(self.gamma_m > 0.0, || format!("mode {l}: damping must be positive"))?;
        ensure(self.gamma_m < 0.1 * self.omega_m, || {
            format!("mode {l}: damping must be below 0.1·omega_m (underdamped)")
        })?;
        ensure(self.m_eff > 0.0 && self.m_eff.is_finite(), || {
            format!("mode {l}: motional mass must be positive")
        })?;
        ensure(self.cross_section_radius > 0.0, || {
            format!("mode {l}: cross-section radius must be positive")
        })?;
        let a = &self.anchor;
        let lever = match self.family {
            ModeFamily::FlexuralX => a.r * a.phi.cos(),
            ModeFamily::FlexuralY => a.r * a.phi.sin(),
            ModeFamily::Breathing => 1.0,
        };
        let has_strain = a.tensor != StrainTensor::zero();
        ensure(!has_strain || lever.abs() > 1e-15, || {
            format!("mode {l}: anchor lies on the neutral plane of a flexural mode")
        })
    }

    pub fn freq_hz(&self) -> f64 {
        crate::units::to_hz(self.omega_m)
    }
}

/// u_zpf = √(ħ/(2·m_eff·ω_m)).
pub fn zero_point(mode: &MechMode) -> f64 {
    (HBAR / (2.0 * mode.m_eff * mode.omega_m)).sqrt()
}

/// u_th = √(k_B·T/(m_eff·ω_m²)).
pub fn thermal_rms(mode: &MechMode, temperature: f64) -> f64 {
    (K_B * temperature.max(0.0) / mode.m_eff).sqrt() / mode.omega_m
}

/// χ(ω) = 1/(m_eff·(ω_m² − ω² − iγ_m·ω)).
pub fn susceptibility(mode: &MechMode, omega: f64) -> Complex64 {
    let den = Complex64::new(
        mode.omega_m * mode.omega_m - omega * omega,
        -mode.gamma_m * omega,
    );
    1.0 / (mode.m_eff * den)
}

/// Strain tensor at `pos`, per unit thermal displacement of the mode.
pub fn strain_at(mode: &MechMode, pos: &QDPosition) -> Result<StrainTensor> {
    if pos.r > mode.cross_section_radius {
        return Err(Error::Domain(format!(
            "position r = {:.3e} m lies outside the cross-section (radius {:.3e} m)",
            pos.r, mode.cross_section_radius
        )));
    }
    let a = &mode.anchor;
    let scale = match mode.family {
        ModeFamily::FlexuralX => (pos.r * pos.phi.cos()) / (a.r * a.phi.cos()),
        ModeFamily::FlexuralY => (pos.r * pos.phi.sin()) / (a.r * a.phi.sin()),
        ModeFamily::Breathing => 1.0,
    };
    Ok(a.tensor * scale)
}

/// Δ^th = a·ε_h + (b/2)·ε_sh, converted from eV to rad/s.
pub fn frequency_shift_from_strain(s: &StrainTensor, dp: &DeformationPotentials) -> f64 {
    (dp.a * s.hydrostatic() + 0.5 * dp.b * s.shear()) * EV / HBAR
}

/// λ = |Δ^th|·u_zpf/u_th at the emitter position.
pub fn coupling_from_strain(
    mode: &MechMode,
    pos: &QDPosition,
    dp: &DeformationPotentials,
    temperature: f64,
) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::Domain(
            "coupling from strain needs T > 0 (thermal normalization)".into(),
        ));
    }
    let shift = frequency_shift_from_strain(&strain_at(mode, pos)?, dp);
    Ok(shift.abs() * zero_point(mode) / thermal_rms(mode, temperature))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorRecord {
    r_m: f64,
    phi_rad: f64,
    e_zz: f64,
    e_xx: f64,
    e_yy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct ModeRecord {
    label: String,
    family: ModeFamily,
    order: u32,
    freq_over_2pi_Hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma_m_over_2pi_Hz: Option<f64>,
    #[serde(default, rename = "Q", skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    m_eff_kg: f64,
    anchor: AnchorRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda_over_2pi_Hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogRecord {
    #[serde(default = "default_radius")]
    cross_section_radius_m: f64,
    modes: Vec<ModeRecord>,
}

fn default_radius() -> f64 {
    DEFAULT_RADIUS
}

/// Immutable set of modes loaded from a JSON catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCatalog {
    pub cross_section_radius: f64,
    pub modes: Vec<MechMode>,
    /// Measured couplings λ (rad/s) where the catalog provides them.
    pub couplings: Vec<Option<f64>>,
}

impl ModeCatalog {
    pub fn from_json(text: &str) -> Result<Self> {
        let rec: CatalogRecord = serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("catalog: {e}")))?;
        if rec.modes.is_empty() {
            return invalid("catalog contains no modes");
        }
        let mut modes = Vec::with_capacity(rec.modes.len());
        let mut couplings = Vec::with_capacity(rec.modes.len());
        for m in rec.modes {
            let omega_m = hz(m.freq_over_2pi_Hz);
            let gamma_m = match (m.gamma_m_over_2pi_Hz, m.q) {
                (Some(g), None) => hz(g),
                (None, Some(q)) if q > 0.0 => omega_m / q,
                (None, Some(_)) => return invalid(format!("mode {}: Q must be positive", m.label)),
                _ => {
                    return invalid(format!(
                        "mode {}: give exactly one of gamma_m_over_2pi_Hz and Q",
                        m.label
                    ))
                }
            };
            let mode = MechMode {
                label: m.label,
                family: m.family,
                order: m.order,
                omega_m,
                gamma_m,
                m_eff: m.m_eff_kg,
                anchor: StrainAnchor {
                    r: m.anchor.r_m,
                    phi: m.anchor.phi_rad,
                    tensor: StrainTensor::new(m.anchor.e_zz, m.anchor.e_xx, m.anchor.e_yy),
                },
                cross_section_radius: rec.cross_section_radius_m,
            };
            mode.validate()?;
            if modes.iter().any(|x: &MechMode| x.label == mode.label) {
                return invalid(format!("duplicate mode label {}", mode.label));
            }
            couplings.push(m.lambda_over_2pi_Hz.map(hz));
            modes.push(mode);
        }
        Ok(ModeCatalog {
            cross_section_radius: rec.cross_section_radius_m,
            modes,
            couplings,
        })
    }

    /// Catalog of the reference device.
    pub fn default_device() -> Self {
        Self::from_json(include_str!("../data/catalog.json")).expect("bundled catalog is valid")
    }

    pub fn get(&self, label: &str) -> Option<&MechMode> {
        self.modes.iter().find(|m| m.label == label)
    }

    pub fn coupling(&self, label: &str) -> Option<f64> {
        let i = self.modes.iter().position(|m| m.label == label)?;
        self.couplings[i]
    }

    /// Returns a copy with one mode replaced.
    pub fn with_mode(&self, mode: MechMode) -> Self {
        let mut c = self.clone();
        if let Some(slot) = c.modes.iter_mut().find(|m| m.label == mode.label) {
            *slot = mode;
        } else {
            c.modes.push(mode);
            c.couplings.push(None);
        }
        c
    }
}
