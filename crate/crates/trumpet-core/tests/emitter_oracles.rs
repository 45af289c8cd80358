use proptest::prelude::*;
use std::f64::consts::PI;
use trumpet_core::emitter::*;
use trumpet_core::faddeeva::voigt_fwhm;
use trumpet_core::presets;
use trumpet_core::units::{hz, to_hz};

/// Steady state of the optical Bloch equations for H = ħ(Ω/2)σx − ħΔσz/2,
/// T1 = 1/γ_sp, T2 = 1/γ. Returns γ_sp·ρ_ee.
fn bloch_rate(gamma_sp: f64, gamma_star: f64, omega: f64, delta: f64) -> f64 {
    let g = gamma_sp / 2.0 + gamma_star;
    // With p = w + 1 = 2ρ_ee:
    // u' = −g u − Δ v; v' = Δ u − g v − Ω p + Ω; p' = Ω v − γ_sp p
    let a = [[-g, -delta, 0.0], [delta, -g, -omega], [0.0, omega, -gamma_sp]];
    let b = [0.0, -omega, 0.0];
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    let mut m = a;
    for (row, bi) in m.iter_mut().zip(b) {
        row[2] = bi;
    }
    gamma_sp * 0.5 * det(&m) / d
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn voigt_by_convolution(e: &Emitter, omega_r: f64, delta: f64) -> f64 {
    let s = e.sigma_inh;
    let hom = e.homogeneous();
    simpson(
        |x| {
            rf_rate(&hom, &DriveCondition { omega_r, detuning: delta - x }) * (-0.5 * x * x / (s * s)).exp()
                / (s * (2.0 * PI).sqrt())
        },
        -12.0 * s,
        12.0 * s,
        20_000,
    )
}

#[test]
fn rf_rate_matches_bloch_steady_state() {
    for &(gs, om) in &[(0.0, 1.1e9), (3e8, 2e8), (1e9, 5e9), (0.0, 1e6)] {
        let e = Emitter::new(1.1e9, gs, 0.0).unwrap();
        for k in -20..=20 {
            let d = k as f64 * 2.5e8;
            let closed = rf_rate(&e, &DriveCondition { omega_r: om, detuning: d });
            let num = bloch_rate(1.1e9, gs, om, d);
            assert!((closed / num - 1.0).abs() < 1e-10, "γ*={gs} Ω={om} Δ={d}: {closed} vs {num}");
        }
    }
}

#[test]
fn power_broadening_at_gamma_sp_matches_bloch_half_width() {
    let gsp = 1.0e9;
    let peak = bloch_rate(gsp, 0.0, gsp, 0.0);
    let (mut lo, mut hi) = (0.0, 10.0 * gsp);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bloch_rate(gsp, 0.0, gsp, mid) > 0.5 * peak {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let e = Emitter::transform_limited(gsp).unwrap();
    let closed = power_broadened_hwhm(&e, gsp);
    assert!((closed / (gsp * 3f64.sqrt() / 2.0) - 1.0).abs() < 1e-12);
    assert!((lo / closed - 1.0).abs() < 1e-9, "{lo} vs {closed}");
}

#[test]
fn device_line_reaches_two_ghz_total_width() {
    // Lorentzian and Gaussian half widths 0.45 and 0.70 GHz combine to
    // Γ_inh/2π = 0.9711 GHz.
    let e = presets::device_emitter();
    let gi = to_hz(presets::device_half_width());
    assert!((gi / 0.9711e9 - 1.0).abs() < 1e-4, "{gi}");
    assert!((2.0 * gi / 2.0e9 - 1.0).abs() < 0.03);
    // Same half width from the numerically convolved profile.
    let peak = voigt_by_convolution(&e, presets::GAMMA_SP, 0.0);
    let (mut lo, mut hi) = (0.0, hz(5e9));
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if voigt_by_convolution(&e, presets::GAMMA_SP, mid) > 0.5 * peak {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((to_hz(lo) / gi - 1.0).abs() < 1e-5, "{} vs {gi}", to_hz(lo));
}

#[test]
fn voigt_rate_matches_numerical_convolution() {
    let e = presets::device_emitter();
    for k in -12..=12 {
        let d = hz(0.25e9) * k as f64;
        let drive = DriveCondition { omega_r: presets::GAMMA_SP, detuning: d };
        let a = voigt_rate(&e, &drive);
        let b = voigt_by_convolution(&e, presets::GAMMA_SP, d);
        assert!((a / b - 1.0).abs() < 1e-6, "Δ/2π = {} GHz: {a} vs {b}", to_hz(d) / 1e9);
    }
}

#[test]
fn gaussian_limit_of_voigt() {
    let sigma = hz(0.5e9);
    let e = Emitter::new(1e3, 0.0, sigma).unwrap();
    let om = 1e3;
    let d0 = voigt_rate(&e, &DriveCondition { omega_r: om, detuning: 0.0 });
    for k in 0..=20 {
        let d = 0.15 * sigma * k as f64;
        let v = voigt_rate(&e, &DriveCondition { omega_r: om, detuning: d });
        let g = d0 * (-0.5 * d * d / (sigma * sigma)).exp();
        assert!((v / g - 1.0).abs() < 1e-4, "x = {}: {v} vs {g}", d / sigma);
    }
}

#[test]
fn voigt_preserves_area() {
    let e = presets::device_emitter();
    let hom = e.homogeneous();
    let om = presets::GAMMA_SP;
    let span = hz(400e9);
    let n = 400_000;
    let a = simpson(|d| voigt_rate(&e, &DriveCondition { omega_r: om, detuning: d }), -span, span, n);
    let b = simpson(|d| rf_rate(&hom, &DriveCondition { omega_r: om, detuning: d }), -span, span, n);
    assert!((a / b - 1.0).abs() < 1e-4, "{a} vs {b}");
}

#[test]
fn saturated_detected_rate() {
    let e = Emitter::transform_limited(1.1e9).unwrap();
    let r = rf_rate(&e, &DriveCondition { omega_r: 1e14, detuning: 0.0 });
    assert!((r / 0.55e9 - 1.0).abs() < 1e-6);
    // 0.16 % of γ_sp/2 is 0.88e6 s⁻¹; the quoted maximum is 0.83e6 s⁻¹.
    let detected = presets::EFFICIENCY * r;
    assert!((detected / 0.83e6 - 1.0).abs() < 0.07, "{detected}");
}

#[test]
fn voigt_fwhm_of_pure_lorentzian_and_gaussian() {
    assert_eq!(voigt_fwhm(3.0, 0.0), 6.0);
    let s = 2.0;
    let g = voigt_fwhm(1e-12, s);
    assert!((g / (2.0 * s * (2.0 * 2f64.ln()).sqrt()) - 1.0).abs() < 1e-9);
}

proptest! {
    #[test]
    fn rate_is_even_and_below_half_gamma(
        gs in 0.0..2e9f64, om in 0.0..1e11f64, d in -1e11..1e11f64
    ) {
        let e = Emitter::new(1.1e9, gs, 0.0).unwrap();
        let a = rf_rate(&e, &DriveCondition { omega_r: om, detuning: d });
        let b = rf_rate(&e, &DriveCondition { omega_r: om, detuning: -d });
        prop_assert_eq!(a, b);
        prop_assert!(a >= 0.0 && a < 0.55e9);
    }

    #[test]
    fn slope_matches_finite_difference(
        gs in 0.0..2e9f64, lom in 7.0..10.5f64, x in -10.0..10.0f64
    ) {
        let e = Emitter::new(1.1e9, gs, 0.0).unwrap();
        let om = 10f64.powf(lom);
        let gam = power_broadened_hwhm(&e, om);
        let d = x * gam;
        let h = 1e-4 * gam;
        let f = |d: f64| rf_rate(&e, &DriveCondition { omega_r: om, detuning: d });
        let fd = (f(d + h) - f(d - h)) / (2.0 * h);
        let a = rf_slope(&e, &DriveCondition { omega_r: om, detuning: d });
        let scale = f(0.0) / gam;
        prop_assert!((a - fd).abs() <= 1e-6 * a.abs().max(1e-3 * scale), "{} vs {}", a, fd);
    }

    #[test]
    fn voigt_slope_matches_finite_difference(x in -6.0..6.0f64) {
        let e = presets::device_emitter();
        let om = presets::GAMMA_SP;
        let gi = presets::device_half_width();
        let d = x * gi;
        let h = 1e-4 * gi;
        let f = |d: f64| voigt_rate(&e, &DriveCondition { omega_r: om, detuning: d });
        let fd = (f(d + h) - f(d - h)) / (2.0 * h);
        let a = voigt_slope(&e, &DriveCondition { omega_r: om, detuning: d });
        prop_assert!((a - fd).abs() <= 1e-6 * a.abs().max(1e-3 * f(0.0) / gi));
    }

    #[test]
    fn broadening_excess_is_quadratic_in_drive(gs in 0.0..2e9f64, lom in 6.0..11.0f64) {
        let e = Emitter::new(1.1e9, gs, 0.0).unwrap();
        let g = total_decoherence(&e);
        let excess = |om: f64| power_broadened_hwhm(&e, om).powi(2) - g * g;
        let (o1, o2) = (10f64.powf(lom), 10f64.powf(lom + 0.5));
        let slope = (excess(o2) / excess(o1)).log10() / 0.5;
        prop_assert!((slope - 2.0).abs() < 1e-6, "{}", slope);
    }

    #[test]
    fn broadening_is_monotone(gs in 0.0..2e9f64, a in 0.0..1e10f64, b in 0.0..1e10f64) {
        let e = Emitter::new(1.1e9, gs, 0.0).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(power_broadened_hwhm(&e, lo) <= power_broadened_hwhm(&e, hi));
        prop_assert!(power_broadened_hwhm(&e, lo) >= total_decoherence(&e));
    }
}
