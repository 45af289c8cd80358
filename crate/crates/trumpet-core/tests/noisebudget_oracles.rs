use proptest::prelude::*;
use trumpet_core::analysis::zpf_integration_time;
use trumpet_core::mechanics::{susceptibility, zero_point};
use trumpet_core::noisebudget::*;
use trumpet_core::presets::{device_readout, ideal_readout, ideal_readout_scaled};
use trumpet_core::units::{bose_occupation, hz, HBAR};
use trumpet_core::Error;

fn floor() -> f64 {
    (HBAR / 2.0).powi(2)
}

#[test]
fn general_imprecision_equals_reduced_form_at_half_width() {
    for k in [0.01, 0.3, 1.0, 4.0] {
        let cfg = ideal_readout().at_drive(k * 1e9).at_half_width();
        let a = imprecision_psd(&cfg).unwrap();
        let b = imprecision_psd_reduced(&cfg).unwrap();
        assert!((a / b - 1.0).abs() < 1e-12, "{k}: {a} vs {b}");
    }
}

#[test]
fn imprecision_diverges_at_line_centre() {
    let cfg = ideal_readout().at_detuning(0.0);
    assert!(matches!(imprecision_psd(&cfg), Err(Error::DivergentSensitivity(_))));
}

#[test]
fn device_imprecision_is_near_quoted_sensitivity() {
    let cfg = device_readout("F1x").unwrap();
    let s = imprecision_psd(&cfg).unwrap().sqrt();
    assert!(s / 2.6e-13 < 3.0 && 2.6e-13 / s < 3.0, "{s}");
}

#[test]
fn imprecision_has_single_minimum_in_drive() {
    let cfg = ideal_readout();
    let grid = log_grid(1e-3 * 1e9, 1e3 * 1e9, 121);
    let rows = budget_sweep(&cfg, SweepVariable::RabiFrequency, &grid, DetuningPolicy::AtHalfWidth).unwrap();
    let s: Vec<f64> = rows.iter().map(|r| r.budget.s_xx_imprecision).collect();
    let turns = s.windows(3).filter(|w| (w[1] - w[0]).signum() != (w[2] - w[1]).signum()).count();
    assert_eq!(turns, 1);
    let imin = s.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!(imin > 0 && imin < s.len() - 1);
}

#[test]
fn backaction_force_rises_then_saturates() {
    let cfg = ideal_readout();
    assert_eq!(backaction_force_psd(&cfg.at_drive(0.0)), 0.0);
    let grid = log_grid(1e-3 * 1e9, 1e4 * 1e9, 141);
    let rows = budget_sweep(&cfg, SweepVariable::RabiFrequency, &grid, DetuningPolicy::AtHalfWidth).unwrap();
    let f: Vec<f64> = rows.iter().map(|r| r.budget.s_ff_backaction).collect();
    assert!(f.windows(2).all(|w| w[1] >= w[0]));
    let u = zero_point(&cfg.mode);
    let sat = (HBAR * cfg.lambda / (u * 1e9)).powi(2) * 1e9 / 4.0;
    assert!((f.last().unwrap() / sat - 1.0).abs() < 1e-6);
    let at_centre = backaction_force_psd(&cfg.at_drive(1e15).at_detuning(0.0));
    assert!((at_centre / (2.0 * sat) - 1.0).abs() < 1e-6);
}

#[test]
fn backaction_displacement_resonance_ratio() {
    let cfg = ideal_readout();
    let m = &cfg.mode;
    let r = backaction_displacement_psd(&cfg, m.omega_m) / backaction_displacement_psd(&cfg, 0.0);
    assert!((r / (m.omega_m / m.gamma_m).powi(2) - 1.0).abs() < 1e-9);
    assert_eq!(backaction_displacement_psd(&cfg.at_drive(0.0), m.omega_m), 0.0);
}

#[test]
fn strong_coupling_regime_balances_at_sql_drive() {
    let cfg = ideal_readout_scaled(10.0);
    let p = sql_drive(&cfg).unwrap();
    let target = zero_point(&cfg.mode).powi(2) / cfg.mode.gamma_m;
    assert!((p.s_xx_backaction / p.s_xx_imprecision - 1.0).abs() < 0.05);
    assert!((p.s_xx_added / (2.0 * target) - 1.0).abs() < 0.05);
    // Back-action dominates once the drive exceeds the SQL drive.
    let over = cfg.at_drive(3.0 * p.omega_r).at_half_width();
    let b = NoiseBudget::evaluate(&over, cfg.mode.omega_m);
    assert!(b.s_xx_backaction > b.s_xx_imprecision);
}

#[test]
fn weak_coupling_minimum_is_imprecision_dominated() {
    let cfg = ideal_readout_scaled(0.1);
    let p = sql_drive(&cfg).unwrap();
    assert!(p.s_xx_backaction / p.s_xx_imprecision < 0.05, "{}", p.s_xx_backaction / p.s_xx_imprecision);
    let target = zero_point(&cfg.mode).powi(2) / cfg.mode.gamma_m;
    assert!(p.s_xx_added > 2.0 * target);
}

#[test]
fn thermal_psd_zero_point_anchor() {
    let m = ideal_readout().mode;
    let s = thermal_psd(&m, 0.0, m.omega_m);
    assert!((s / (2.0 * zero_point(&m).powi(2) / m.gamma_m) - 1.0).abs() < 1e-12);
    let n = bose_occupation(hz(512.8e3), 4.0);
    assert!((n / 1.7e5 - 1.0).abs() < 0.10, "{n}");
    assert!((n / 1.6253e5 - 1.0).abs() < 1e-4, "{n}");
}

#[test]
fn heisenberg_examples() {
    let weak = ideal_readout().at_drive(1e-7 * 1e9);
    let (d, p) = min_heisenberg_product(&weak).unwrap();
    assert!((p / floor() - 1.0).abs() < 1e-9);
    assert!((d / weak.hwhm() - 1.0).abs() < 1e-4);
    let (_, p1) = min_heisenberg_product(&ideal_readout().at_drive(1e9)).unwrap();
    assert!((p1 / (3.0 * floor()) - 1.0).abs() < 1e-9);
    let mut half = weak.clone();
    half.efficiency = 0.5;
    let (_, p2) = min_heisenberg_product(&half).unwrap();
    assert!((p2 / (2.0 * floor()) - 1.0).abs() < 1e-9);
}

#[test]
fn crossover_and_observability() {
    let cfg = ideal_readout();
    let n = crossover_rate(&cfg).unwrap();
    let a = imprecision_at_rate(&cfg, n).unwrap();
    let b = backaction_at_rate(&cfg, n, cfg.mode.omega_m);
    assert!((a / b - 1.0).abs() < 1e-10);
    let mut zero = cfg.clone();
    zero.lambda = 0.0;
    assert!(matches!(crossover_rate(&zero), Err(Error::NoCrossover)));
    // Weak drive, ε = 1: Γ = γ_sp/2 and the condition reads Γ_opt ≥ γ_m.
    let weak = cfg.at_drive(1e-4 * 1e9).at_half_width();
    for k in [0.5, 0.99, 1.01, 2.0] {
        let mut c = weak.clone();
        c.lambda = (k * c.emitter.gamma_sp * c.mode.gamma_m).sqrt();
        let fom = figures_of_merit(&c);
        assert_eq!(crossover_observable(&c).unwrap(), fom.gamma_opt >= c.mode.gamma_m * (1.0 - 1e-6), "{k}");
    }
}

#[test]
fn crossover_sign_changes_once() {
    let cfg = ideal_readout();
    let n_plus = crossover_rate(&cfg).unwrap();
    assert!(n_plus > 0.0);
    let rates = log_grid(1e-3 * n_plus, 1e3 * n_plus, 301);
    let d: Vec<f64> = rates
        .iter()
        .map(|&r| imprecision_at_rate(&cfg, r).unwrap() - backaction_at_rate(&cfg, r, cfg.mode.omega_m))
        .collect();
    let changes = d.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
    assert_eq!(changes, 1);
}

#[test]
fn figures_of_merit_vanish_without_coupling() {
    let mut cfg = device_readout("B2").unwrap();
    cfg.lambda = 0.0;
    let f = figures_of_merit(&cfg);
    assert_eq!((f.gamma_opt, f.cooperativity, f.n_coherent, f.dephasing), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn sweep_validation_and_single_point() {
    let cfg = ideal_readout();
    let rows = budget_sweep(&cfg, SweepVariable::Coupling, &[cfg.lambda], DetuningPolicy::Fixed).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].budget, NoiseBudget::evaluate(&cfg, cfg.mode.omega_m));
    assert!(budget_sweep(&cfg, SweepVariable::Coupling, &[], DetuningPolicy::Fixed).is_err());
    assert!(budget_sweep(&cfg, SweepVariable::Coupling, &[1.0, 3.0, 2.0], DetuningPolicy::Fixed).is_err());
    assert!(budget_sweep(&cfg, SweepVariable::Efficiency, &[0.5, 1.5], DetuningPolicy::Fixed).is_err());
}

#[test]
fn integration_time_scaling() {
    let cfg = device_readout("F1x").unwrap();
    let t = zpf_integration_time(&cfg).unwrap();
    assert!(t > 70.0 / 3.0 && t < 70.0 * 3.0, "{t}");
    let mut e = cfg.clone();
    e.efficiency = 2.0 * cfg.efficiency;
    assert!((zpf_integration_time(&e).unwrap() / t - 0.5).abs() < 1e-12);
    let mut l = cfg.clone();
    l.lambda = 2.0 * cfg.lambda;
    assert!((zpf_integration_time(&l).unwrap() / t - 0.25).abs() < 1e-12);
}

proptest! {
    #[test]
    fn heisenberg_product_formula(lo in -4.0..2.0f64) {
        let om = 1e9 * 10f64.powf(lo);
        let cfg = ideal_readout().at_drive(om);
        let (_, p) = min_heisenberg_product(&cfg).unwrap();
        let expected = 1.0 + 2.0 * (om / 1e9).powi(2);
        prop_assert!((p / floor() / expected - 1.0).abs() < 1e-9);
        prop_assert!(p >= floor() * (1.0 - 1e-9));
    }

    #[test]
    fn product_at_any_detuning_is_above_floor(lo in -4.0..2.0f64, x in 0.05..20.0f64) {
        let cfg = ideal_readout().at_drive(1e9 * 10f64.powf(lo));
        let c = cfg.at_detuning(x * cfg.hwhm());
        prop_assert!(heisenberg_product(&c).unwrap() >= floor() * (1.0 - 1e-9));
    }

    #[test]
    fn sql_balance_in_strong_coupling(k in 5.0..40.0f64) {
        let cfg = ideal_readout_scaled(k);
        let p = sql_drive(&cfg).unwrap();
        prop_assert!((p.s_xx_backaction - p.s_xx_imprecision).abs() / p.s_xx_imprecision < 0.05);
    }

    #[test]
    fn budgets_are_non_negative(lo in -3.0..3.0f64, x in -5.0..5.0f64, lw in -1.0..1.0f64) {
        let cfg = device_readout("F1x").unwrap().at_drive(1.1e9 * 10f64.powf(lo));
        let c = cfg.at_detuning(x * cfg.hwhm());
        let b = NoiseBudget::evaluate(&c, c.mode.omega_m * 10f64.powf(lw));
        prop_assert!(b.s_xx_imprecision >= 0.0 && b.s_ff_backaction >= 0.0);
        prop_assert!(b.s_xx_backaction >= 0.0 && b.s_xx_thermal >= 0.0);
        prop_assert!(b.s_xx_added >= b.s_xx_imprecision && b.s_xx_added >= b.s_xx_backaction);
    }

    #[test]
    fn backaction_is_susceptibility_times_force(lw in -1.0..1.0f64) {
        let cfg = ideal_readout();
        let w = cfg.mode.omega_m * 10f64.powf(lw);
        let a = backaction_displacement_psd(&cfg, w);
        let b = susceptibility(&cfg.mode, w).norm_sqr() * backaction_force_psd(&cfg);
        prop_assert!((a / b - 1.0).abs() < 1e-12);
    }
}
