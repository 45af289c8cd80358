//! Parameter sets of the reference device and of the idealized probe used
//! in the noise-budget figures.

use crate::emitter::{gamma_star_for_hwhm, sigma_from_fwhm, voigt_hwhm, DriveCondition, Emitter};
use crate::mechanics::{MechMode, ModeCatalog};
use crate::noisebudget::{LineshapeModel, ReadoutConfig};
use crate::simulator::{BlinkingModel, DetectorModel, ModeCoupling, SimConfig};
use crate::units::hz;

/// Spontaneous emission rate of the device emitter, s⁻¹.
pub const GAMMA_SP: f64 = 1.1e9;
/// Overall detection efficiency ε (detectors, setup and blinking).
pub const EFFICIENCY: f64 = 0.0016;
/// Telegraph on fraction β.
pub const ON_FRACTION: f64 = 0.1;
/// K
pub const TEMPERATURE: f64 = 4.0;
/// Lorentzian and Gaussian half widths of the fitted fluorescence line, Hz.
pub const LORENTZ_HWHM_HZ: f64 = 0.45e9;
pub const GAUSS_HWHM_HZ: f64 = 0.70e9;

/// Device emitter: pure dephasing chosen so that the Lorentzian half width
/// at Ω_R = γ_sp matches the fitted line, Gaussian part as inhomogeneous broadening.
pub fn device_emitter() -> Emitter {
    let gs = gamma_star_for_hwhm(GAMMA_SP, GAMMA_SP, hz(LORENTZ_HWHM_HZ)).expect("line exceeds transform limit");
    Emitter::new(GAMMA_SP, gs, sigma_from_fwhm(2.0 * hz(GAUSS_HWHM_HZ))).expect("valid emitter")
}

/// Ω_R = γ_sp at detuning Δ.
pub fn device_drive(detuning: f64) -> DriveCondition {
    DriveCondition {
        omega_r: GAMMA_SP,
        detuning,
    }
}

/// Γ_inh: half width of the driven, inhomogeneously broadened line.
pub fn device_half_width() -> f64 {
    voigt_hwhm(&device_emitter(), GAMMA_SP)
}

/// Read-out of one catalog mode on the device at Δ = Γ_inh.
pub fn device_readout(label: &str) -> Option<ReadoutConfig> {
    let cat = ModeCatalog::default_device();
    let mode = cat.get(label)?.clone();
    let lambda = cat.coupling(label)?;
    Some(ReadoutConfig {
        emitter: device_emitter(),
        drive: device_drive(device_half_width()),
        mode,
        lambda,
        efficiency: EFFICIENCY,
        temperature: TEMPERATURE,
        lineshape: LineshapeModel::Inhomogeneous,
    })
}

/// Device simulation at Δ = Γ_inh with the listed catalog modes and their couplings.
pub fn device_simulation(labels: &[&str], duration: f64, seed: u64) -> Option<SimConfig> {
    let cat = ModeCatalog::default_device();
    let modes: Vec<ModeCoupling> = labels
        .iter()
        .map(|l| {
            Some(ModeCoupling {
                mode: cat.get(l)?.clone(),
                lambda: cat.coupling(l)?,
            })
        })
        .collect::<Option<_>>()?;
    let dt = SimConfig::max_dt(&modes);
    Some(SimConfig {
        modes,
        emitter: device_emitter(),
        drive: device_drive(device_half_width()),
        efficiency: EFFICIENCY,
        temperature: TEMPERATURE,
        blinking: BlinkingModel {
            on_fraction: ON_FRACTION,
            correlation_time: 100e-9,
        },
        detector: DetectorModel::default(),
        duration,
        dt,
        seed,
    })
}

/// Idealized probe: γ_sp = 1 GHz, transform limited, ε = 1, T = 0, with the
/// fundamental flexural mode (m_eff = 2.6e-14 kg, γ_m/2π = 300 Hz) at
/// λ/2π = 280 kHz, Ω_R = γ_sp and Δ = Γ.
pub fn ideal_readout() -> ReadoutConfig {
    let gamma_sp = 1e9;
    let mode = MechMode::simple("F1x", hz(607.9e3), hz(300.0), 2.6e-14).expect("valid mode");
    let cfg = ReadoutConfig {
        emitter: Emitter::transform_limited(gamma_sp).expect("valid emitter"),
        drive: DriveCondition {
            omega_r: gamma_sp,
            detuning: 0.0,
        },
        mode,
        lambda: hz(280e3),
        efficiency: 1.0,
        temperature: 0.0,
        lineshape: LineshapeModel::Homogeneous,
    };
    cfg.at_half_width()
}

/// Ideal probe with λ = k·√(γ_sp·γ_m).
pub fn ideal_readout_scaled(k: f64) -> ReadoutConfig {
    let mut cfg = ideal_readout();
    cfg.lambda = k * (cfg.emitter.gamma_sp * cfg.mode.gamma_m).sqrt();
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emitter::power_broadened_hwhm;

    #[test]
    fn device_line_widths() {
        let e = device_emitter();
        let g = power_broadened_hwhm(&e, GAMMA_SP);
        assert!((g / hz(0.45e9) - 1.0).abs() < 1e-9);
        let gi = device_half_width() / hz(1e9);
        assert!(gi > 0.9 && gi < 1.05, "{gi}");
    }

    #[test]
    fn device_presets_exist() {
        assert!(device_readout("F1x").is_some());
        assert!(device_readout("F2x").is_none());
        assert!(device_simulation(&["F1x", "F1y"], 1.0, 1).unwrap().validate().is_ok());
    }
}
