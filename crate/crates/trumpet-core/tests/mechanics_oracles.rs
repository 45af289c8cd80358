use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI};
use trumpet_core::mechanics::*;
use trumpet_core::noisebudget::thermal_psd;
use trumpet_core::units::{bose_occupation, hz, to_hz, HBAR, K_B};
use trumpet_core::Error;

fn f1x() -> MechMode {
    ModeCatalog::default_device().get("F1x").unwrap().clone()
}

fn b2() -> MechMode {
    ModeCatalog::default_device().get("B2").unwrap().clone()
}

fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * f(a + i as f64 * h)
        })
        .sum::<f64>()
        * h
}

#[test]
fn zero_point_examples() {
    let m = MechMode::simple("F1", hz(607.9e3), hz(200.0), 2.6e-14).unwrap();
    assert!((zero_point(&m) / 2.3e-14 - 1.0).abs() < 0.02);
    let mut heavy = m.clone();
    heavy.m_eff *= 2.0;
    assert!((zero_point(&m) / zero_point(&heavy) - 2f64.sqrt()).abs() < 1e-12);
    let unit = MechMode::simple("u", 1e6, 1e3, HBAR / 2e6).unwrap();
    assert!((zero_point(&unit) - 1.0).abs() < 1e-12);
}

#[test]
fn thermal_examples() {
    assert!((thermal_rms(&f1x(), 4.0) / 1.2e-11 - 1.0).abs() < 0.02);
    assert_eq!(thermal_rms(&f1x(), 0.0), 0.0);
}

#[test]
fn susceptibility_resonance_width() {
    let m = f1x();
    let peak = susceptibility(&m, m.omega_m).norm();
    assert!((peak * m.m_eff * m.gamma_m * m.omega_m - 1.0).abs() < 1e-12);
    let c0 = susceptibility(&m, 0.0);
    assert!(c0.im == 0.0 && (c0.re * m.m_eff * m.omega_m.powi(2) - 1.0).abs() < 1e-12);
    // FWHM of |χ|² from a numerical scan.
    let p = |w: f64| susceptibility(&m, w).norm_sqr();
    let half = 0.5 * p(m.omega_m);
    let edge = |mut lo: f64, mut hi: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (p(mid) > half) == (p(lo) > half) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let w1 = edge(m.omega_m - 10.0 * m.gamma_m, m.omega_m);
    let w2 = edge(m.omega_m, m.omega_m + 10.0 * m.gamma_m);
    assert!(((w2 - w1) / m.gamma_m - 1.0).abs() < 1e-3, "{}", (w2 - w1) / m.gamma_m);
}

#[test]
fn susceptibility_integral() {
    let m = MechMode::simple("t", hz(1e6), hz(1e3), 1e-14).unwrap();
    let p = |w: f64| susceptibility(&m, w).norm_sqr();
    let (w0, g) = (m.omega_m, m.gamma_m);
    let mut num = trapezoid(p, 0.0, w0 - 50.0 * g, 200_000);
    num += trapezoid(p, w0 - 50.0 * g, w0 + 50.0 * g, 400_000);
    num += trapezoid(p, w0 + 50.0 * g, 40.0 * w0, 400_000);
    // |χ|² is even in ω; the closed form covers the whole real line.
    num *= 2.0 / (2.0 * PI);
    let closed = 1.0 / (2.0 * m.m_eff.powi(2) * g * w0 * w0);
    assert!((num / closed - 1.0).abs() < 1e-3, "{}", num / closed);
}

#[test]
fn thermal_psd_integrates_to_equipartition() {
    let m = MechMode::simple("t", hz(1e6), hz(1e3), 1e-14).unwrap();
    let t = 300.0;
    let (w0, g) = (m.omega_m, m.gamma_m);
    let s = |w: f64| thermal_psd(&m, t, w);
    let mut num = trapezoid(s, 0.0, w0 - 50.0 * g, 200_000);
    num += trapezoid(s, w0 - 50.0 * g, w0 + 50.0 * g, 400_000);
    num += trapezoid(s, w0 + 50.0 * g, 40.0 * w0, 400_000);
    // Double-sided density: the positive half carries u²/2.
    let area = 2.0 * num / (2.0 * PI);
    let n = bose_occupation(w0, t);
    let expected = zero_point(&m).powi(2) * (2.0 * n + 1.0);
    assert!((area / expected - 1.0).abs() < 2e-3, "{}", area / expected);
    let u_th2 = thermal_rms(&m, t).powi(2);
    assert!((area / u_th2 - 1.0).abs() < 3e-3);
}

#[test]
fn table_strains_and_shape_rules() {
    let m = f1x();
    let s = strain_at(&m, &QDPosition::degrees(45.0, 0.0).unwrap()).unwrap();
    for (a, b) in [(s.e_zz, 5.9e-8), (s.e_xx, -1.6e-8), (s.e_yy, -1.9e-8)] {
        assert!((a / b - 1.0).abs() < 1e-12);
    }
    let z = strain_at(&m, &QDPosition::new(0.0, 0.3).unwrap()).unwrap();
    assert_eq!(z, StrainTensor::zero());
    for (r, phi) in [(0.0, 0.0), (30.0, 45.0), (149.0, 89.0)] {
        let s = strain_at(&b2(), &QDPosition::degrees(r, phi).unwrap()).unwrap();
        assert!((s.e_zz / 7.0e-8 - 1.0).abs() < 1e-12);
    }
    assert!(matches!(
        strain_at(&m, &QDPosition::degrees(200.0, 10.0).unwrap()),
        Err(Error::Domain(_))
    ));
}

#[test]
fn table_tensors_are_nearly_uniaxial() {
    let dp = DeformationPotentials::default();
    for l in ["F1x", "B2"] {
        let m = ModeCatalog::default_device().get(l).unwrap().clone();
        assert!(m.anchor.tensor.uniaxial_deviation(dp.nu) < 0.15, "{l}");
    }
}

#[test]
fn deformation_shifts() {
    let dp = DeformationPotentials::default();
    let anchor = QDPosition::degrees(45.0, 0.0).unwrap();
    let f = to_hz(frequency_shift_from_strain(&strain_at(&f1x(), &anchor).unwrap(), &dp).abs());
    let b = to_hz(frequency_shift_from_strain(&strain_at(&b2(), &anchor).unwrap(), &dp).abs());
    assert!((f / 0.08e9 - 1.0).abs() < 0.10, "{f}");
    assert!((b / 0.10e9 - 1.0).abs() < 0.10, "{b}");
    // Frozen values.
    assert!((f / 85.27e6 - 1.0).abs() < 1e-3, "{f}");
    assert!((b / 103.9e6 - 1.0).abs() < 1e-3, "{b}");
    assert_eq!(frequency_shift_from_strain(&StrainTensor::zero(), &dp), 0.0);
}

#[test]
fn strain_coupling_of_fundamental_mode() {
    let dp = DeformationPotentials::default();
    let anchor = QDPosition::degrees(45.0, 0.0).unwrap();
    let l = to_hz(coupling_from_strain(&f1x(), &anchor, &dp, 4.0).unwrap());
    // Δ^th·u_zpf/u_th computed by hand: 85.27 MHz / 523.7.
    let by_hand = 85.27e6 * zero_point(&f1x()) / thermal_rms(&f1x(), 4.0);
    assert!((l / by_hand - 1.0).abs() < 1e-3);
    assert!((l / 1.63e5 - 1.0).abs() < 0.01, "{l}");
    assert!(l > 280e3 / 10.0 && l < 280e3 * 10.0);
    assert!(matches!(coupling_from_strain(&f1x(), &anchor, &dp, 0.0), Err(Error::Domain(_))));
    let mut doubled = f1x();
    doubled.anchor.tensor = doubled.anchor.tensor * 2.0;
    let l2 = to_hz(coupling_from_strain(&doubled, &anchor, &dp, 4.0).unwrap());
    assert!((l2 / l - 2.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn amplitude_ratio_identity(lf in 4.0..8.0f64, lm in -16.0..-12.0f64, t in 0.01..400.0f64) {
        let w = hz(10f64.powf(lf));
        let m = MechMode::simple("p", w, 1e-3 * w, 10f64.powf(lm)).unwrap();
        let r = thermal_rms(&m, t) / zero_point(&m);
        let expected = (2.0 * K_B * t / (HBAR * w)).sqrt();
        prop_assert!((r / expected - 1.0).abs() < 1e-10);
    }

    #[test]
    fn flexural_strain_vanishes_on_neutral_axis(r in 0.0..150.0f64) {
        let s = strain_at(&f1x(), &QDPosition::new(r * 1e-9, FRAC_PI_2).unwrap()).unwrap();
        prop_assert!(s.e_zz.abs() < 1e-22 && s.e_xx.abs() < 1e-22 && s.e_yy.abs() < 1e-22);
        let y = ModeCatalog::default_device().get("F1y").unwrap().clone();
        let s = strain_at(&y, &QDPosition::new(r * 1e-9, 0.0).unwrap()).unwrap();
        prop_assert!(s.e_zz.abs() < 1e-22);
    }

    #[test]
    fn flexural_strain_scales_with_projection(r in 1.0..150.0f64, phi in 0.0..89.0f64) {
        let s = strain_at(&f1x(), &QDPosition::degrees(r, phi).unwrap()).unwrap();
        let k = r * phi.to_radians().cos() / 45.0;
        prop_assert!((s.e_zz - 5.9e-8 * k).abs() <= 1e-12 * 5.9e-8);
        prop_assert!((s.e_xx / s.e_zz - (-1.6 / 5.9)).abs() < 1e-12);
    }

    #[test]
    fn shift_is_additive(
        a in prop::array::uniform3(-1e-7..1e-7f64), b in prop::array::uniform3(-1e-7..1e-7f64)
    ) {
        let dp = DeformationPotentials::default();
        let s1 = StrainTensor::new(a[0], a[1], a[2]);
        let s2 = StrainTensor::new(b[0], b[1], b[2]);
        let lhs = frequency_shift_from_strain(&(s1 + s2), &dp);
        let rhs = frequency_shift_from_strain(&s1, &dp) + frequency_shift_from_strain(&s2, &dp);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
    }

    #[test]
    fn breathing_coupling_is_position_independent(r in 0.0..150.0f64, phi in 0.0..90.0f64) {
        let dp = DeformationPotentials::default();
        let a = coupling_from_strain(&b2(), &QDPosition::degrees(r, phi).unwrap(), &dp, 4.0).unwrap();
        let b = coupling_from_strain(&b2(), &QDPosition::degrees(45.0, 0.0).unwrap(), &dp, 4.0).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn canonical_folding_is_idempotent(r in 0.0..1e-7f64, phi in -10.0..10.0f64) {
        let p = QDPosition::canonical(r, phi).unwrap();
        prop_assert!(p.phi >= 0.0 && p.phi <= FRAC_PI_2);
        let q = QDPosition::canonical(p.r, p.phi).unwrap();
        prop_assert!((p.phi - q.phi).abs() < 1e-15);
        let mirrored = QDPosition::canonical(r, PI - phi).unwrap();
        prop_assert!((mirrored.phi - p.phi).abs() < 1e-12);
    }
}
