//! Coupling extraction from peak areas and displacement-sensitivity figures.

use super::spectrum::Spectrum;
use crate::emitter::LineshapeParams;
use crate::error::{ensure, Error, Result};
use crate::mechanics::{thermal_rms, zero_point, MechMode};
use crate::noisebudget::{imprecision_psd, ReadoutConfig};
use serde::{Deserialize, Serialize};

/// Peak area measured at one laser detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaPoint {
    /// rad/s
    pub detuning: f64,
    pub area: f64,
    /// Zero means unweighted.
    pub uncertainty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingFit {
    /// rad/s
    pub lambda: f64,
    /// Reduced χ² (weighted) or mean squared residual (unweighted).
    pub residual: f64,
    /// Variance of λ, (rad/s)².
    pub variance: f64,
    pub points: usize,
}

impl CouplingFit {
    pub fn std_error(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// A(Δ) predicted for coupling λ: (λ·(u_th/u_zpf)·α/⟨Ṅ_d⟩)².
pub fn predicted_area(lambda: f64, lineshape: &LineshapeParams, detuning: f64, mode: &MechMode, temperature: f64) -> f64 {
    let r = thermal_rms(mode, temperature) / zero_point(mode);
    (lambda * r * lineshape.relative_slope(detuning)).powi(2)
}

/// Least squares in λ² with α/⟨Ṅ_d⟩ from the fitted lineshape; linear in the
/// single parameter, so the solution is closed-form.
pub fn extract_coupling(
    points: &[AreaPoint],
    lineshape: &LineshapeParams,
    mode: &MechMode,
    temperature: f64,
) -> Result<CouplingFit> {
    ensure(points.len() >= 3, || {
        format!("coupling fit needs at least 3 detuning points, got {}", points.len())
    })?;
    lineshape.validate()?;
    ensure(temperature > 0.0, || "coupling fit needs T > 0".into())?;
    if points.iter().all(|p| p.area == 0.0) {
        return Err(Error::NoSignal("all peak areas are zero".into()));
    }
    let weighted = points.iter().all(|p| p.uncertainty > 0.0);
    let x: Vec<f64> = points
        .iter()
        .map(|p| predicted_area(1.0, lineshape, p.detuning, mode, temperature))
        .collect();
    let w: Vec<f64> = points
        .iter()
        .map(|p| if weighted { p.uncertainty.powi(-2) } else { 1.0 })
        .collect();
    let sxx: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
    ensure(sxx > 0.0, || "all points sit at zero spectral slope".into())?;
    let sxy: f64 = x.iter().zip(&w).zip(points).map(|((x, w), p)| w * x * p.area).sum();
    let l2 = (sxy / sxx).max(0.0);
    let chi2: f64 = x
        .iter()
        .zip(&w)
        .zip(points)
        .map(|((x, w), p)| w * (p.area - l2 * x).powi(2))
        .sum();
    let dof = (points.len() - 1) as f64;
    let residual = chi2 / dof;
    let var_l2 = if weighted { 1.0 / sxx } else { residual / sxx };
    let lambda = l2.sqrt();
    let variance = if lambda > 0.0 {
        var_l2 / (4.0 * l2)
    } else {
        var_l2.sqrt()
    };
    Ok(CouplingFit {
        lambda,
        residual,
        variance,
        points: points.len(),
    })
}

/// Median NPSD over `[f_lo, f_hi]`, 1/Hz.
pub fn floor_between(spec: &Spectrum, f_lo: f64, f_hi: f64) -> Result<f64> {
    let i0 = spec.frequencies.partition_point(|&f| f < f_lo);
    let i1 = spec.frequencies.partition_point(|&f| f <= f_hi);
    ensure(i1 > i0 + 2, || "floor band contains too few bins".into())?;
    let mut v = spec.density[i0..i1].to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v[v.len() / 2])
}

/// Equivalent displacement noise of the measured floor near ω_m, m/√Hz:
/// (u_zpf/λ)·(⟨Ṅ_d⟩/α)·√(S̄_floor/2). The factor 1/2 converts the one-sided
/// NPSD to the double-sided convention of the noise budget.
pub fn displacement_sensitivity(
    spec: &Spectrum,
    mode: &MechMode,
    lambda: f64,
    lineshape: &LineshapeParams,
    detuning: f64,
) -> Result<f64> {
    let g = lineshape.relative_slope(detuning);
    if g == 0.0 || lambda == 0.0 {
        return Err(Error::DivergentSensitivity(
            "zero transduction: slope or coupling vanishes".into(),
        ));
    }
    let f = mode.freq_hz();
    let floor = floor_between(spec, 0.9 * f, 1.1 * f)?;
    ensure(floor > 0.0, || "floor near the mode is not positive".into())?;
    Ok(zero_point(mode) / lambda / g.abs() * (0.5 * floor).sqrt())
}

/// Averaging time after which the imprecision floor in a 1/τ bandwidth
/// equals u_zpf²: τ = S_xx^I/u_zpf².
pub fn zpf_integration_time(cfg: &ReadoutConfig) -> Result<f64> {
    let s = imprecision_psd(cfg)?;
    Ok(s / zero_point(&cfg.mode).powi(2))
}
