//! Closed-form read-out noise theory.
//!
//! PSDs here are double-sided (symmetrized) densities. Measured spectra in
//! [`crate::analysis`] are one-sided; multiply these by two to compare.

use crate::emitter::{
    power_broadened_hwhm, rf_rate, rf_slope, voigt_hwhm, voigt_rate, voigt_slope, DriveCondition,
    Emitter,
};
use crate::error::{ensure, invalid, Error, Result};
use crate::mechanics::{susceptibility, thermal_rms, zero_point, MechMode};
use crate::optimize::golden_section;
use crate::units::{bose_occupation, HBAR};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Which line enters rate and slope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineshapeModel {
    /// Power-broadened Lorentzian only.
    #[default]
    Homogeneous,
    /// Lorentzian convolved with the emitter's Gaussian broadening.
    Inhomogeneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutConfig {
    pub emitter: Emitter,
    pub drive: DriveCondition,
    pub mode: MechMode,
    /// Coupling λ, rad/s.
    pub lambda: f64,
    /// Detection efficiency ε.
    pub efficiency: f64,
    /// K
    pub temperature: f64,
    #[serde(default)]
    pub lineshape: LineshapeModel,
}

impl ReadoutConfig {
    pub fn validate(&self) -> Result<()> {
        self.emitter.validate()?;
        self.mode.validate()?;
        ensure(self.efficiency > 0.0 && self.efficiency <= 1.0, || {
            format!("efficiency must lie in (0, 1], got {}", self.efficiency)
        })?;
        ensure(self.lambda >= 0.0 && self.lambda.is_finite(), || {
            format!("lambda must be non-negative, got {}", self.lambda)
        })?;
        ensure(self.temperature >= 0.0, || "temperature must be non-negative".into())
    }

    /// Emitted rate Ṅ at the configured drive.
    pub fn rate(&self) -> f64 {
        match self.lineshape {
            LineshapeModel::Homogeneous => rf_rate(&self.emitter, &self.drive),
            LineshapeModel::Inhomogeneous => voigt_rate(&self.emitter, &self.drive),
        }
    }

    /// α = ∂Ṅ/∂Δ at the configured drive.
    pub fn slope(&self) -> f64 {
        match self.lineshape {
            LineshapeModel::Homogeneous => rf_slope(&self.emitter, &self.drive),
            LineshapeModel::Inhomogeneous => voigt_slope(&self.emitter, &self.drive),
        }
    }

    /// Line half width: Γ or Γ_inh depending on the lineshape model.
    pub fn hwhm(&self) -> f64 {
        match self.lineshape {
            LineshapeModel::Homogeneous => power_broadened_hwhm(&self.emitter, self.drive.omega_r),
            LineshapeModel::Inhomogeneous => voigt_hwhm(&self.emitter, self.drive.omega_r),
        }
    }

    pub fn at_detuning(&self, detuning: f64) -> Self {
        ReadoutConfig {
            drive: self.drive.at(detuning),
            ..self.clone()
        }
    }

    /// Same configuration operated at Δ equal to the line half width.
    pub fn at_half_width(&self) -> Self {
        self.at_detuning(self.hwhm())
    }

    pub fn at_drive(&self, omega_r: f64) -> Self {
        ReadoutConfig {
            drive: DriveCondition {
                omega_r,
                detuning: self.drive.detuning,
            },
            ..self.clone()
        }
    }
}

/// S_xx^I = (u_zpf/λ)²·Ṅ/(ε·α²).
pub fn imprecision_psd(cfg: &ReadoutConfig) -> Result<f64> {
    let alpha = cfg.slope();
    if alpha == 0.0 {
        return Err(Error::DivergentSensitivity(
            "spectral slope vanishes (detuning at line center)".into(),
        ));
    }
    if cfg.lambda == 0.0 {
        return Err(Error::DivergentSensitivity("coupling is zero".into()));
    }
    let u = zero_point(&cfg.mode);
    Ok((u / cfg.lambda).powi(2) * cfg.rate() / (cfg.efficiency * alpha * alpha))
}

/// S_xx^I at Δ = Γ of the homogeneous line: (u_zpf·Γ/λ)²/(ε·Ṅ(Γ)).
pub fn imprecision_psd_reduced(cfg: &ReadoutConfig) -> Result<f64> {
    let gam = power_broadened_hwhm(&cfg.emitter, cfg.drive.omega_r);
    let rate = rf_rate(&cfg.emitter, &cfg.drive.at(gam));
    imprecision_at_rate(cfg, rate)
}

/// Reduced imprecision at Δ = Γ expressed through the emitted rate.
pub fn imprecision_at_rate(cfg: &ReadoutConfig, rate: f64) -> Result<f64> {
    if cfg.lambda == 0.0 || rate <= 0.0 {
        return Err(Error::DivergentSensitivity("no transduction".into()));
    }
    let gam = power_broadened_hwhm(&cfg.emitter, cfg.drive.omega_r);
    let u = zero_point(&cfg.mode);
    Ok((u * gam / cfg.lambda).powi(2) / (cfg.efficiency * rate))
}

/// S_FF = (ħλ/(u_zpf·γ_sp))²·Ṅ.
pub fn backaction_force_psd(cfg: &ReadoutConfig) -> f64 {
    force_psd_at_rate(cfg, cfg.rate())
}

fn force_psd_at_rate(cfg: &ReadoutConfig, rate: f64) -> f64 {
    let u = zero_point(&cfg.mode);
    (HBAR * cfg.lambda / (u * cfg.emitter.gamma_sp)).powi(2) * rate
}

/// S_xx^BA(ω) = |χ(ω)|²·S_FF.
pub fn backaction_displacement_psd(cfg: &ReadoutConfig, omega: f64) -> f64 {
    susceptibility(&cfg.mode, omega).norm_sqr() * backaction_force_psd(cfg)
}

/// S_xx^BA(ω) for a prescribed emitted rate.
pub fn backaction_at_rate(cfg: &ReadoutConfig, rate: f64, omega: f64) -> f64 {
    susceptibility(&cfg.mode, omega).norm_sqr() * force_psd_at_rate(cfg, rate)
}

/// S_xx^th(ω) = |χ|²·m·γ_m·ħω_m·(2n̄ + 1).
pub fn thermal_psd(mode: &MechMode, temperature: f64, omega: f64) -> f64 {
    let nbar = bose_occupation(mode.omega_m, temperature);
    susceptibility(mode, omega).norm_sqr()
        * mode.m_eff
        * mode.gamma_m
        * HBAR
        * mode.omega_m
        * (2.0 * nbar + 1.0)
}

/// S_xx^I·S_FF at the configured detuning.
pub fn heisenberg_product(cfg: &ReadoutConfig) -> Result<f64> {
    Ok(imprecision_psd(cfg)? * backaction_force_psd(cfg))
}

/// Minimum of S_xx^I·S_FF over Δ > 0. Returns (Δ*, product).
pub fn min_heisenberg_product(cfg: &ReadoutConfig) -> Result<(f64, f64)> {
    let w = cfg.hwhm();
    let f = |ld: f64| {
        heisenberg_product(&cfg.at_detuning(w * ld.exp())).unwrap_or(f64::INFINITY)
    };
    let (ld, _) = golden_section(f, -5.0, 5.0, 1e-12);
    let delta = w * ld.exp();
    Ok((delta, heisenberg_product(&cfg.at_detuning(delta))?))
}

/// Emitted rate Ṅ₊ at which S_xx^I(ω_m) = S_xx^BA(ω_m) at Δ = Γ.
///
/// Equating the two gives Ṅ₊ = Γ·γ_sp·γ_m/(2·√ε·λ²).
pub fn crossover_rate(cfg: &ReadoutConfig) -> Result<f64> {
    if cfg.lambda == 0.0 {
        return Err(Error::NoCrossover);
    }
    let gam = power_broadened_hwhm(&cfg.emitter, cfg.drive.omega_r);
    Ok(gam * cfg.emitter.gamma_sp * cfg.mode.gamma_m
        / (2.0 * cfg.efficiency.sqrt() * cfg.lambda * cfg.lambda))
}

/// True when Ṅ₊ lies below the saturated rate at Δ = Γ, γ_sp/4.
pub fn crossover_observable(cfg: &ReadoutConfig) -> Result<bool> {
    Ok(crossover_rate(cfg)? <= cfg.emitter.gamma_sp / 4.0)
}

/// Smallest λ² for which the crossover is observable: 2Γγ_m/√ε.
pub fn observability_threshold(cfg: &ReadoutConfig) -> f64 {
    let gam = power_broadened_hwhm(&cfg.emitter, cfg.drive.omega_r);
    2.0 * gam * cfg.mode.gamma_m / cfg.efficiency.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiguresOfMerit {
    /// Γ_opt = λ²/γ_sp, rad/s.
    pub gamma_opt: f64,
    /// C = λ²/(γ_sp·γ_m).
    pub cooperativity: f64,
    /// Phonon-laser scale (λ/γ_m)².
    pub n_coherent: f64,
    /// Thermal occupation n̄.
    pub n_thermal: f64,
    /// δΔ_th = λ·u_th/u_zpf, rad/s.
    pub dephasing: f64,
}

pub fn figures_of_merit(cfg: &ReadoutConfig) -> FiguresOfMerit {
    let l2 = cfg.lambda * cfg.lambda;
    let mode = &cfg.mode;
    FiguresOfMerit {
        gamma_opt: l2 / cfg.emitter.gamma_sp,
        cooperativity: l2 / (cfg.emitter.gamma_sp * mode.gamma_m),
        n_coherent: (cfg.lambda / mode.gamma_m).powi(2),
        n_thermal: bose_occupation(mode.omega_m, cfg.temperature),
        dephasing: cfg.lambda * thermal_rms(mode, cfg.temperature) / zero_point(mode),
    }
}

/// All noise contributions at one analysis frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    /// rad/s
    pub omega: f64,
    pub rate: f64,
    pub s_xx_imprecision: f64,
    pub s_ff_backaction: f64,
    pub s_xx_backaction: f64,
    pub s_xx_thermal: f64,
    pub s_xx_added: f64,
    pub heisenberg_product: f64,
    pub gamma_opt: f64,
    pub cooperativity: f64,
}

impl NoiseBudget {
    /// Evaluates the budget at `omega`. Imprecision is infinite at Δ = 0.
    pub fn evaluate(cfg: &ReadoutConfig, omega: f64) -> Self {
        let s_i = imprecision_psd(cfg).unwrap_or(f64::INFINITY);
        let s_ff = backaction_force_psd(cfg);
        let s_ba = backaction_displacement_psd(cfg, omega);
        let fom = figures_of_merit(cfg);
        NoiseBudget {
            omega,
            rate: cfg.rate(),
            s_xx_imprecision: s_i,
            s_ff_backaction: s_ff,
            s_xx_backaction: s_ba,
            s_xx_thermal: thermal_psd(&cfg.mode, cfg.temperature, omega),
            s_xx_added: s_i + s_ba,
            heisenberg_product: s_i * s_ff,
            gamma_opt: fom.gamma_opt,
            cooperativity: fom.cooperativity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    RabiFrequency,
    Detuning,
    Efficiency,
    Coupling,
}

/// How the detuning follows a Rabi-frequency sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetuningPolicy {
    #[default]
    Fixed,
    /// Δ tracks the half width at each drive.
    AtHalfWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub value: f64,
    pub omega_r: f64,
    pub detuning: f64,
    pub budget: NoiseBudget,
}

fn apply(template: &ReadoutConfig, var: SweepVariable, v: f64, policy: DetuningPolicy) -> ReadoutConfig {
    let mut cfg = template.clone();
    match var {
        SweepVariable::RabiFrequency => cfg.drive.omega_r = v,
        SweepVariable::Detuning => cfg.drive.detuning = v,
        SweepVariable::Efficiency => cfg.efficiency = v,
        SweepVariable::Coupling => cfg.lambda = v,
    }
    if policy == DetuningPolicy::AtHalfWidth && var != SweepVariable::Detuning {
        cfg = cfg.at_half_width();
    }
    cfg
}

/// One budget row per grid point, evaluated at ω_m, in grid order.
pub fn budget_sweep(
    template: &ReadoutConfig,
    var: SweepVariable,
    grid: &[f64],
    policy: DetuningPolicy,
) -> Result<Vec<BudgetRow>> {
    template.validate()?;
    if grid.is_empty() {
        return invalid("sweep grid is empty");
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return invalid("sweep grid contains non-finite values");
    }
    let inc = grid.windows(2).all(|w| w[1] > w[0]);
    let dec = grid.windows(2).all(|w| w[1] < w[0]);
    if !(inc || dec) {
        return invalid("sweep grid must be strictly monotone");
    }
    for &v in grid {
        apply(template, var, v, policy).validate()?;
    }
    let omega = template.mode.omega_m;
    Ok(grid
        .par_iter()
        .map(|&v| {
            let cfg = apply(template, var, v, policy);
            BudgetRow {
                value: v,
                omega_r: cfg.drive.omega_r,
                detuning: cfg.drive.detuning,
                budget: NoiseBudget::evaluate(&cfg, omega),
            }
        })
        .collect())
}

/// Logarithmic grid of `n` points between `a` and `b`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqlPoint {
    pub omega_r: f64,
    pub s_xx_imprecision: f64,
    pub s_xx_backaction: f64,
    pub s_xx_added: f64,
}

/// Drive minimizing the added noise at ω_m with Δ held at Γ.
pub fn sql_drive(cfg: &ReadoutConfig) -> Result<SqlPoint> {
    cfg.validate()?;
    if cfg.lambda == 0.0 {
        return Err(Error::DivergentSensitivity("coupling is zero".into()));
    }
    let g = cfg.emitter.gamma_sp;
    let added = |omega_r: f64| {
        let c = cfg.at_drive(omega_r).at_half_width();
        NoiseBudget::evaluate(&c, cfg.mode.omega_m).s_xx_added
    };
    let grid = log_grid(1e-6 * g, 1e3 * g, 181);
    let best = (0..grid.len())
        .map(|i| (i, added(grid[i])))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
        .0;
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (x, _) = golden_section(added, lo, hi, 1e-4);
    let c = cfg.at_drive(x).at_half_width();
    let b = NoiseBudget::evaluate(&c, cfg.mode.omega_m);
    Ok(SqlPoint {
        omega_r: c.drive.omega_r,
        s_xx_imprecision: b.s_xx_imprecision,
        s_xx_backaction: b.s_xx_backaction,
        s_xx_added: b.s_xx_added,
    })
}

/// Writes sweep rows as CSV preceded by `#`-prefixed configuration lines.
pub fn write_sweep_csv<W: Write>(rows: &[BudgetRow], config_json: &str, mut w: W) -> Result<()> {
    for line in config_json.lines() {
        writeln!(w, "# {line}")?;
    }
    writeln!(
        w,
        "value,omega_r_rad_s,detuning_rad_s,rate_s-1,s_xx_imprecision_m2_Hz,s_ff_backaction_N2_Hz,\
         s_xx_backaction_m2_Hz,s_xx_thermal_m2_Hz,s_xx_added_m2_Hz,heisenberg_product_J2s2,\
         gamma_opt_rad_s,cooperativity"
    )?;
    for r in rows {
        let b = &r.budget;
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.value,
            r.omega_r,
            r.detuning,
            b.rate,
            b.s_xx_imprecision,
            b.s_ff_backaction,
            b.s_xx_backaction,
            b.s_xx_thermal,
            b.s_xx_added,
            b.heisenberg_product,
            b.gamma_opt,
            b.cooperativity
        )?;
    }
    Ok(())
}
