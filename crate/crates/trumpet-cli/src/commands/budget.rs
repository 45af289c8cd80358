use crate::config::{BudgetConfig, Loaded, Spacing};
use crate::error::CliResult;
use crate::output::{config_line, OutDir};
use crate::svg::{Plot, Series, PALETTE};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::Path;
use trumpet_core::analysis::{displacement_sensitivity, zpf_integration_time, SpectralResponse, Spectrum};
use trumpet_core::emitter::LineshapeParams;
use trumpet_core::mechanics::{frequency_shift_from_strain, thermal_rms, zero_point, DeformationPotentials};
use trumpet_core::noisebudget::*;
use trumpet_core::units::{hz, to_hz, HBAR};

pub struct BudgetReport {
    pub summary: Value,
    pub rows: Option<Vec<BudgetRow>>,
}

/// Displacement noise of a shot-noise-limited record, m/√Hz.
fn shot_noise_sensitivity(cfg: &ReadoutConfig) -> CliResult<f64> {
    let rate = cfg.efficiency * cfg.rate();
    let f = cfg.mode.freq_hz();
    let n = 2001;
    let df = f / (n - 1) as f64;
    let spec = Spectrum {
        frequencies: (0..n).map(|i| 0.5 * f + i as f64 * df).collect(),
        density: vec![2.0 / rate; n],
        one_sided: true,
        mean_rate: rate,
        rbw: df,
        response: SpectralResponse::Flat,
        averages: None,
        bin_correlation: 1.0,
    };
    let line = LineshapeParams::from_emitter(&cfg.emitter, cfg.drive.omega_r);
    Ok(displacement_sensitivity(&spec, &cfg.mode, cfg.lambda, &line, cfg.drive.detuning)?)
}

fn crossover(cfg: &ReadoutConfig) -> Value {
    match crossover_rate(cfg) {
        Ok(n) => json!({
            "rate_per_s": n,
            "s_xx_imprecision_m2_per_Hz": imprecision_at_rate(cfg, n).ok(),
            "s_xx_backaction_m2_per_Hz": backaction_at_rate(cfg, n, cfg.mode.omega_m),
            "observable": crossover_observable(cfg).unwrap_or(false),
            "saturated_rate_per_s": cfg.emitter.gamma_sp / 4.0,
            "lambda_squared_threshold_per_s2": observability_threshold(cfg),
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn summary(cfg: &ReadoutConfig) -> CliResult<Value> {
    let m = &cfg.mode;
    let fom = figures_of_merit(cfg);
    let nb = NoiseBudget::evaluate(cfg, m.omega_m);
    let u_zpf = zero_point(m);
    let hbar2 = (HBAR / 2.0).powi(2);
    let (d_star, p_min) = min_heisenberg_product(cfg)?;
    let sql = sql_drive(cfg).ok();
    let sql_scale = u_zpf * u_zpf / m.gamma_m;
    let anchor_shift = frequency_shift_from_strain(&m.anchor.tensor, &DeformationPotentials::default());
    let s_i = nb.s_xx_imprecision;
    Ok(json!({
        "mode": {
            "label": m.label,
            "freq_Hz": m.freq_hz(),
            "gamma_m_over_2pi_Hz": to_hz(m.gamma_m),
            "m_eff_kg": m.m_eff,
            "u_zpf_m": u_zpf,
            "u_th_m": thermal_rms(m, cfg.temperature),
            "n_thermal": fom.n_thermal,
            "anchor_shift_over_2pi_Hz": to_hz(anchor_shift),
        },
        "operating_point": {
            "rabi_per_s": cfg.drive.omega_r,
            "rabi_gamma_sp": cfg.drive.omega_r / cfg.emitter.gamma_sp,
            "detuning_over_2pi_Hz": to_hz(cfg.drive.detuning),
            "half_width_over_2pi_Hz": to_hz(cfg.hwhm()),
            "lambda_over_2pi_Hz": to_hz(cfg.lambda),
            "emitted_rate_per_s": cfg.rate(),
            "detected_rate_per_s": cfg.efficiency * cfg.rate(),
            "efficiency": cfg.efficiency,
            "temperature_K": cfg.temperature,
        },
        "figures_of_merit": {
            "gamma_opt_over_2pi_Hz": to_hz(fom.gamma_opt),
            "cooperativity": fom.cooperativity,
            "n_coherent": fom.n_coherent,
            "n_thermal": fom.n_thermal,
            "dephasing_over_2pi_Hz": to_hz(fom.dephasing),
        },
        "noise_at_omega_m": {
            "s_xx_imprecision_m2_per_Hz": if s_i.is_finite() { Some(s_i) } else { None },
            "sqrt_s_xx_imprecision_m_per_sqrt_Hz": if s_i.is_finite() { Some(s_i.sqrt()) } else { None },
            "s_ff_backaction_N2_per_Hz": nb.s_ff_backaction,
            "s_xx_backaction_m2_per_Hz": nb.s_xx_backaction,
            "s_xx_thermal_m2_per_Hz": nb.s_xx_thermal,
            "heisenberg_product_over_hbar_half_squared": if s_i.is_finite() { Some(nb.heisenberg_product / hbar2) } else { None },
            "shot_noise_sensitivity_m_per_sqrt_Hz": shot_noise_sensitivity(cfg).ok(),
            "zpf_integration_time_s": zpf_integration_time(cfg).ok(),
        },
        "min_heisenberg_product": {
            "detuning_over_2pi_Hz": to_hz(d_star),
            "product_over_hbar_half_squared": p_min / hbar2,
        },
        "crossover": crossover(cfg),
        "sql": sql.map(|p| json!({
            "rabi_per_s": p.omega_r,
            "rabi_gamma_sp": p.omega_r / cfg.emitter.gamma_sp,
            "s_xx_imprecision_m2_per_Hz": p.s_xx_imprecision,
            "s_xx_backaction_m2_per_Hz": p.s_xx_backaction,
            "s_xx_added_m2_per_Hz": p.s_xx_added,
            "imprecision_over_zpf_scale": p.s_xx_imprecision / sql_scale,
            "backaction_over_zpf_scale": p.s_xx_backaction / sql_scale,
        })),
    }))
}

fn log_positive(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    points.into_iter().filter(|(_, y)| y.is_finite() && *y > 0.0).collect()
}

pub fn sweep_svg(rows: &[BudgetRow], x_label: &str, x_scale: f64, x_log: bool, title: &str, meta: &str) -> String {
    let col = |f: fn(&NoiseBudget) -> f64| log_positive(rows.iter().map(|r| (r.value / x_scale, f(&r.budget))).collect());
    Plot {
        title: title.into(),
        x_label: x_label.into(),
        y_label: "S_xx (m²/Hz)".into(),
        x_log,
        y_log: true,
        series: vec![
            Series::new("imprecision", col(|b| b.s_xx_imprecision), PALETTE[0]),
            Series::new("back-action", col(|b| b.s_xx_backaction), PALETTE[1]),
            Series::new("added", col(|b| b.s_xx_added), PALETTE[2]),
            Series::new("thermal", col(|b| b.s_xx_thermal), PALETTE[3]).dashed(),
        ],
        metadata: meta.into(),
        ..Plot::default()
    }
    .render()
}

fn x_axis(var: SweepVariable, gamma_sp: f64) -> (&'static str, f64) {
    match var {
        SweepVariable::RabiFrequency => ("Ω_R/γ_sp", gamma_sp),
        SweepVariable::Detuning => ("Δ/2π (Hz)", hz(1.0)),
        SweepVariable::Coupling => ("λ/2π (Hz)", hz(1.0)),
        SweepVariable::Efficiency => ("ε", 1.0),
    }
}

pub fn run(cfg: &Loaded<BudgetConfig>, out: &Path) -> CliResult<BudgetReport> {
    let readout = cfg.build()?;
    let c = &cfg.value;
    let header = config_line(c);
    let mut dir = OutDir::create(out)?;
    let mut summary = summary(&readout)?;
    summary["config"] = serde_json::to_value(c).expect("configuration serializes");

    let mut rows = None;
    if let Some(s) = &c.sweep {
        let grid = s.grid(cfg, readout.emitter.gamma_sp)?;
        let r = budget_sweep(&readout, s.variable, &grid, s.detuning_policy)?;
        let mut buf = Vec::new();
        write_sweep_csv(&r, &header, &mut buf)?;
        dir.write("sweep.csv", &buf)?;
        let (label, scale) = x_axis(s.variable, readout.emitter.gamma_sp);
        let svg = sweep_svg(&r, label, scale, s.spacing == Spacing::Log, &format!("Noise budget, {}", readout.mode.label), &header);
        dir.write("sweep.svg", svg.as_bytes())?;
        rows = Some(r);
    }

    if let Some(fs) = &c.frequency_sweep {
        cfg.check(fs.points >= 1, "points", "must be at least 1")?;
        cfg.check(fs.from_over_2pi_Hz > 0.0 && fs.to_over_2pi_Hz > fs.from_over_2pi_Hz, "from_over_2pi_Hz", "needs 0 < from < to")?;
        let at = if fs.at_sql_drive {
            readout.at_drive(sql_drive(&readout)?.omega_r).at_half_width()
        } else {
            readout.clone()
        };
        let freqs = log_grid(fs.from_over_2pi_Hz, fs.to_over_2pi_Hz, fs.points);
        let r: Vec<BudgetRow> = freqs
            .iter()
            .map(|&f| BudgetRow {
                value: hz(f),
                omega_r: at.drive.omega_r,
                detuning: at.drive.detuning,
                budget: NoiseBudget::evaluate(&at, hz(f)),
            })
            .collect();
        let mut s = format!("# {header}\nfreq_Hz,s_xx_imprecision_m2_Hz,s_xx_backaction_m2_Hz,s_xx_thermal_m2_Hz,s_xx_added_m2_Hz\n");
        for row in &r {
            let b = &row.budget;
            let _ = writeln!(
                s,
                "{:e},{:e},{:e},{:e},{:e}",
                to_hz(row.value),
                b.s_xx_imprecision,
                b.s_xx_backaction,
                b.s_xx_thermal,
                b.s_xx_added
            );
        }
        dir.write("frequency_sweep.csv", s.as_bytes())?;
        let title = if fs.at_sql_drive { "Noise spectra at the SQL drive" } else { "Noise spectra" };
        dir.write("frequency_sweep.svg", sweep_svg(&r, "frequency (Hz)", hz(1.0), true, title, &header).as_bytes())?;
    }

    dir.write_json("summary.json", &summary)?;
    dir.finish("budget", serde_json::to_value(c).expect("configuration serializes"))?;
    Ok(BudgetReport { summary, rows })
}
