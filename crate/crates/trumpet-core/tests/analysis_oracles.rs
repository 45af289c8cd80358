use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use std::f64::consts::PI;
use trumpet_core::analysis::*;
use trumpet_core::emitter::{rf_rate, voigt_rate, DriveCondition, Emitter, LineshapeParams};
use trumpet_core::mechanics::{
    coupling_from_strain, thermal_rms, zero_point, DeformationPotentials, MechMode, ModeCatalog, QDPosition,
};
use trumpet_core::presets;
use trumpet_core::simulator::*;
use trumpet_core::units::hz;
use trumpet_core::Error;

const LABELS: [&str; 6] = ["F1y", "F1x", "B1", "F2x", "B2", "F3x"];

fn poisson(rate: f64, duration: f64, seed: u64) -> PhotonTags {
    let e = Emitter::transform_limited(1.1e9).unwrap();
    let d = DriveCondition { omega_r: 1.1e9, detuning: 0.0 };
    let eff = rate / rf_rate(&e, &d);
    generate_photons(&mut ConstantDetuning(0.0), &e, &d, eff, &BlinkingModel::none(), duration, seed).unwrap()
}

fn flat_spectrum(level: f64, n: usize, df: f64, averages: Option<f64>) -> Spectrum {
    Spectrum {
        frequencies: (0..n).map(|k| k as f64 * df).collect(),
        density: vec![level; n],
        one_sided: true,
        mean_rate: 2.0 / level,
        rbw: df,
        response: SpectralResponse::Flat,
        averages,
        bin_correlation: 1.0,
    }
}

fn peak(center: f64) -> PeakResult {
    PeakResult {
        label: None,
        center,
        area: 1.0,
        floor: 0.0,
        uncertainty: 0.1,
        clipped: false,
        window: PeakWindow::around(None, center, 1.0),
    }
}

#[test]
fn shot_noise_floor_over_seeds() {
    let rate = 1e5;
    let mut outside = 0;
    let mut pulls = Vec::new();
    for seed in 0..100 {
        let tags = poisson(rate, 0.2, 1000 + seed);
        let spec = tags_npsd(&tags, 1e-6, 1 << 12, Window::Hann, None).unwrap();
        let (i0, i1) = (10, 2000);
        let m = (i1 - i0) as f64;
        let floor = spec.density[i0..i1].iter().sum::<f64>() / m;
        let expected = spec.shot_noise();
        let se = expected * (spec.bin_correlation / (spec.averages.unwrap() * m)).sqrt();
        let z = (floor - expected) / se;
        if z.abs() > 3.0 {
            outside += 1;
        }
        pulls.push(z);
    }
    let mean = pulls.iter().sum::<f64>() / 100.0;
    assert!(outside <= 3, "{outside} runs outside 3σ");
    assert!(mean.abs() < 3.0 / 10.0, "mean pull {mean}");
}

fn modulated_config(duration: f64, seed: u64) -> SimConfig {
    let mode = MechMode::simple("t", hz(1e5), hz(100.0), 1e-14).unwrap();
    let e = Emitter::transform_limited(1e9).unwrap();
    let gamma = trumpet_core::emitter::power_broadened_hwhm(&e, 1e9);
    let r = thermal_rms(&mode, 4.0) / zero_point(&mode);
    SimConfig {
        modes: vec![ModeCoupling { mode, lambda: 0.2 * gamma / r }],
        emitter: e,
        drive: DriveCondition { omega_r: 1e9, detuning: gamma },
        efficiency: 1e-3,
        temperature: 4.0,
        blinking: BlinkingModel::none(),
        detector: DetectorModel::ideal(),
        duration,
        dt: 5e-7,
        seed,
    }
}

#[test]
fn parseval_matches_trace_variance() {
    let tags = modulated_config(0.5, 3).run().unwrap();
    let trace = TimeTrace::from_tags(&tags, 1e-6, None).unwrap();
    let seg = 1 << 16;
    let spec = trace_npsd(&trace, seg, Window::Rectangular).unwrap();
    let integral = spec.density.iter().sum::<f64>() * spec.df();
    // Relative variance within the Welch segments, averaged over segments.
    let step = seg / 2;
    let k = (trace.counts.len() - seg) / step + 1;
    let mut v = 0.0;
    for s in 0..k {
        let c = &trace.counts[s * step..s * step + seg];
        let m = c.iter().map(|&x| x as f64).sum::<f64>() / seg as f64;
        v += c.iter().map(|&x| (x as f64 - m).powi(2)).sum::<f64>() / seg as f64;
    }
    let mean = trace.total() as f64 / trace.counts.len() as f64;
    let direct = v / k as f64 / (mean * mean);
    assert!((integral / direct - 1.0).abs() < 0.01, "{integral} vs {direct}");
    // The whole-trace variance agrees as well, up to sub-segment frequencies.
    let whole = trace.counts.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>()
        / trace.counts.len() as f64
        / (mean * mean);
    assert!((integral / whole - 1.0).abs() < 0.01, "{integral} vs {whole}");
}

#[test]
fn fundamental_pair_peaks_at_catalog_frequencies() {
    let mut cfg = presets::device_simulation(&["F1x", "F1y"], 10.0, 6).unwrap();
    cfg.efficiency = 0.05;
    cfg.blinking = BlinkingModel::none();
    let tags = cfg.run().unwrap();
    let spec = tags_npsd(&tags, 0.5e-6, 1 << 18, Window::Hann, None).unwrap();
    for (label, f) in [("F1y", 512.8e3), ("F1x", 607.9e3)] {
        let p = &find_peaks_and_areas(&spec, &[PeakWindow::around(Some(label), f, 1e3)]).unwrap()[0];
        assert!(p.significance() > 10.0, "{label}: {p:?}");
        assert!((p.center - f).abs() <= spec.rbw, "{label}: {} vs {f} (rbw {})", p.center, spec.rbw);
    }
}

#[test]
fn constructed_lorentzian_with_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let k = 200.0;
    let gamma = Gamma::new(k, 1.0 / k).unwrap();
    let mut s = flat_spectrum(1e-3, 40_000, 1.0, Some(k));
    let (a, f0, hw) = (0.2, 20_000.0, 20.0);
    for (f, d) in s.frequencies.iter().zip(s.density.iter_mut()) {
        let mean = *d + a * hw / PI / ((f - f0).powi(2) + hw * hw);
        *d = mean * gamma.sample(&mut rng);
    }
    let p = &find_peaks_and_areas(&s, &[PeakWindow::around(Some("x"), f0, 4000.0)]).unwrap()[0];
    assert!((p.area / a - 1.0).abs() < 0.05, "{}", p.area);
    let empty = &find_peaks_and_areas(&s, &[PeakWindow::around(None, 8000.0, 1000.0)]).unwrap()[0];
    assert!(empty.area <= 3.0 * empty.uncertainty, "{empty:?}");
}

#[test]
fn pure_floor_from_simulation_has_no_area() {
    let tags = poisson(2e5, 1.0, 77);
    let spec = tags_npsd(&tags, 1e-6, 1 << 14, Window::Hann, None).unwrap();
    let rs = find_peaks_and_areas(&spec, &[PeakWindow::around(None, 1e5, 2e3), PeakWindow::around(None, 2e5, 5e3)])
        .unwrap();
    for p in rs {
        assert!(p.area <= 3.0 * p.uncertainty, "{p:?}");
        assert!((p.floor / spec.shot_noise() - 1.0).abs() < 0.05);
    }
}

#[test]
fn window_validation() {
    let s = flat_spectrum(1.0, 1000, 1.0, None);
    assert!(matches!(
        find_peaks_and_areas(&s, &[PeakWindow::around(None, 5.0, 20.0)]),
        Err(Error::Validation(_))
    ));
    assert!(matches!(
        find_peaks_and_areas(&s, &[PeakWindow { label: None, low: 50.0, high: 40.0 }]),
        Err(Error::Validation(_))
    ));
    let w = [PeakWindow::around(None, 300.0, 20.0), PeakWindow::around(None, 330.0, 20.0)];
    assert!(matches!(find_peaks_and_areas(&s, &w), Err(Error::Validation(_))));
}

fn synthetic_table(f0: f64, c: f64, bin: f64, tau_max: f64, rate: f64) -> G2Table {
    let k = (tau_max / bin).round() as i64;
    let tau: Vec<f64> = (-k..=k).map(|i| i as f64 * bin).collect();
    G2Table {
        g2: tau.iter().map(|t| 1.0 + c * (2.0 * PI * f0 * t).cos()).collect(),
        coincidences: vec![0; tau.len()],
        tau,
        bin_width: bin,
        mean_rate: rate,
        duration: 1.0,
        poor_statistics: false,
    }
}

#[test]
fn cosine_correlation_transforms_to_single_peak() {
    let (f0, c) = (1e6, 0.02);
    let t = synthetic_table(f0, c, 0.1e-6, 1e-3, 1e12);
    let spec = npsd_from_g2(&t, DEFAULT_TAU_MIN, 8).unwrap();
    let i = spec.density.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!((spec.frequencies[i] - f0).abs() <= spec.df());
    let p = &find_peaks_and_areas(&spec, &[PeakWindow::around(None, f0, 50e3)]).unwrap()[0];
    assert!((p.area / c - 1.0).abs() < 0.02, "{}", p.area / c);
    assert!((p.center - f0).abs() < spec.rbw);

    let flat = synthetic_table(f0, 0.0, 0.1e-6, 1e-3, 5e4);
    let s = npsd_from_g2(&flat, DEFAULT_TAU_MIN, 4).unwrap();
    assert!(s.density.iter().all(|d| (d * 5e4 / 2.0 - 1.0).abs() < 1e-12));
    assert!(matches!(npsd_from_g2(&flat, 2e-3, 4), Err(Error::Validation(_))));
}

#[test]
fn correlation_histogram_flags_and_errors() {
    let tags = hbt_split(&poisson(1e5, 0.01, 5), 5).unwrap();
    assert!(g2_histogram(&tags, 1e-6, 2e-3).unwrap().poor_statistics);
    assert!(!g2_histogram(&tags, 1e-6, 0.5e-3).unwrap().poor_statistics);
    let single = poisson(1e5, 0.01, 5);
    assert!(matches!(g2_histogram(&single, 1e-6, 1e-4), Err(Error::ChannelCount { expected: 2, found: 1 })));
}

/// Projection of g² − 1 on cos and sin at `f` over τ ∈ [a, b]; returns amplitude and its error.
fn cosine_amplitude(t: &G2Table, f: f64, a: f64, b: f64) -> (f64, f64) {
    let (mut cc, mut ss, mut n, mut var) = (0.0, 0.0, 0.0, 0.0);
    let c0 = t.center();
    for i in c0..t.tau.len() {
        let tau = t.tau[i];
        if tau < a || tau > b {
            continue;
        }
        let x = t.g2[i] - 1.0;
        cc += x * (2.0 * PI * f * tau).cos();
        ss += x * (2.0 * PI * f * tau).sin();
        n += 1.0;
        var += 1.0 / (t.coincidences[i] + t.coincidences[2 * c0 - i]) as f64;
    }
    let err = (2.0 * var).sqrt() / n;
    // Remove the noise bias of the quadrature sum.
    let amp2 = (2.0 * (cc * cc + ss * ss).sqrt() / n).powi(2) - err * err;
    (amp2.max(0.0).sqrt(), err)
}

#[test]
fn breathing_mode_visible_over_full_correlation_range() {
    let mut cfg = presets::device_simulation(&["B2"], 2.0, 12).unwrap();
    cfg.blinking = BlinkingModel::none();
    cfg.detector = DetectorModel { channels: 2, ..DetectorModel::ideal() };
    cfg.efficiency = 2.5e6 / voigt_rate(&cfg.emitter, &cfg.drive);
    let tags = cfg.run().unwrap();
    let t = g2_histogram(&tags, 1e-9, 8e-6).unwrap();
    let f = 37e6;
    let (early, e_err) = cosine_amplitude(&t, f, 0.25e-6, 1.25e-6);
    let (late, l_err) = cosine_amplitude(&t, f, 7e-6, 8e-6);
    assert!(early > 10.0 * e_err, "{early} ± {e_err}");
    assert!(late > 5.0 * l_err, "{late} ± {l_err}");
    // Envelope decays at γ_m/2.
    let g = cfg.modes[0].mode.gamma_m;
    let ratio = late / early;
    let expected = (-0.5 * g * (7.5e-6 - 0.75e-6)).exp();
    let ratio_err = ratio * ((e_err / early).powi(2) + (l_err / late).powi(2)).sqrt();
    assert!((ratio - expected).abs() < 3.0 * ratio_err, "{ratio} ± {ratio_err} vs {expected}");
    let spec = npsd_from_g2(&t, DEFAULT_TAU_MIN, 4).unwrap();
    let p = &find_peaks_and_areas(&spec, &[PeakWindow::around(Some("B2"), f, 2e6)]).unwrap()[0];
    assert!((p.center - f).abs() < spec.rbw.max(cfg.modes[0].mode.gamma_m / (2.0 * PI)));
}

#[test]
fn full_device_mode_ladder() {
    // Modes without a measured coupling take the strain value at (35 nm, 20°).
    let cat = ModeCatalog::default_device();
    let pos = QDPosition::degrees(35.0, 20.0).unwrap();
    let dp = DeformationPotentials::default();
    let mut cfg = presets::device_simulation(&["F1x"], 0.15, 19).unwrap();
    cfg.modes = LABELS
        .iter()
        .map(|l| {
            let mode = cat.get(l).unwrap().clone();
            let lambda = cat
                .coupling(l)
                .unwrap_or_else(|| coupling_from_strain(&mode, &pos, &dp, presets::TEMPERATURE).unwrap());
            ModeCoupling { mode, lambda }
        })
        .collect();
    cfg.dt = SimConfig::max_dt(&cfg.modes);
    cfg.efficiency = 1.0;
    cfg.blinking = BlinkingModel::none();
    let tags = cfg.run().unwrap();
    let t = g2_histogram(&tags, 1e-9, 30e-6).unwrap();
    let spec = npsd_from_g2(&t, DEFAULT_TAU_MIN, 2).unwrap();
    let windows = detect_windows(&spec, 5.0, 200e3).unwrap();
    let peaks = find_peaks_and_areas(&spec, &windows).unwrap();
    let assigned = assign_modes(&peaks, &cat, DEFAULT_MATCH_TOLERANCE).unwrap();
    // Table I puts B1's anchor strain at 1.3e-10: its modulation power is
    // far below what a finite record resolves.
    let model = G2Model::at_operating_point(&cfg.emitter, &cfg.drive, &cfg.blinking, &cfg.modes, 4.0, 0.0);
    assert!(model.mechanics[2].power < 1e-6);
    let found: Vec<&str> = assigned
        .iter()
        .filter(|a| a.peak.significance() >= 3.0)
        .filter_map(|a| a.mode.as_deref())
        .collect();
    for l in ["B2", "F3x"] {
        assert!(found.contains(&l), "{l} missing from {found:?}");
    }
    assert!(found.iter().any(|l| l.starts_with("F1")), "{found:?}");
    assert!(found.iter().any(|l| l.starts_with("F2")), "{found:?}");
    assert!(!found.contains(&"B1"));
}

#[test]
fn mode_assignment_examples() {
    let cat = ModeCatalog::default_device();
    let a = assign_modes(&[peak(607.9e3)], &cat, DEFAULT_MATCH_TOLERANCE).unwrap();
    assert_eq!(a[0].mode.as_deref(), Some("F1x"));
    let mut b2 = cat.get("B2").unwrap().clone();
    b2.omega_m = hz(40.0e6);
    let table = cat.with_mode(b2);
    let a = assign_modes(&[peak(37e6)], &table, DEFAULT_MATCH_TOLERANCE).unwrap();
    assert_eq!(a[0].mode.as_deref(), Some("B2"));
    let a = assign_modes(&[peak(607.9e3 * 1.2), peak(37e6 * 0.8)], &cat, DEFAULT_MATCH_TOLERANCE).unwrap();
    assert!(a.iter().all(|x| x.mode.is_none() && x.peak.label.is_none()));
    // Each catalog mode is used once.
    let a = assign_modes(&[peak(600e3), peak(607.9e3)], &cat, 0.01).unwrap();
    assert_eq!(a[1].mode.as_deref(), Some("F1x"));
    assert!(a[0].mode.is_none());
}

fn scan(line: &LineshapeParams, noise: f64, seed: u64) -> Vec<RfPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, noise * line.amplitude).unwrap();
    (0..201)
        .map(|i| {
            let d = hz(-4e9 + i as f64 * 0.04e9);
            RfPoint { detuning: d, rate: line.rate(d) + n.sample(&mut rng), sigma: noise * line.amplitude }
        })
        .collect()
}

#[test]
fn voigt_fit_recovers_generator() {
    let truth = LineshapeParams::new(hz(0.45e9), hz(0.70e9), 5e4, hz(0.05e9)).unwrap();
    for seed in 0..5 {
        let fit = fit_rf_spectrum(&scan(&truth, 0.01, seed)).unwrap();
        let p = fit.params;
        assert!((p.lorentzian_fwhm / truth.lorentzian_fwhm - 1.0).abs() < 0.05, "{seed}: {p:?}");
        assert!((p.gaussian_fwhm / truth.gaussian_fwhm - 1.0).abs() < 0.05, "{seed}: {p:?}");
        assert!((p.amplitude / truth.amplitude - 1.0).abs() < 0.05);
        assert!((p.center - truth.center).abs() < 0.05 * truth.lorentzian_fwhm);
        // The 5 % whiteness flag trips by chance; require p well above that tail.
        assert!(fit.ljung_box_p > 1e-3, "{seed}: p = {}", fit.ljung_box_p);
    }
}

#[test]
fn lorentzian_fit_has_no_gaussian_part() {
    let truth = LineshapeParams::new(hz(1.0e9), 0.0, 5e4, 0.0).unwrap();
    let pts = scan(&truth, 0.01, 9);
    let fit = fit_rf_spectrum(&pts).unwrap();
    let chi2 = |p: &LineshapeParams| pts.iter().map(|q| ((q.rate - p.rate(q.detuning)) / q.sigma).powi(2)).sum::<f64>();
    // Likelihood ratio against G = 0, re-optimizing L only (an upper bound on Δχ²).
    let best = chi2(&fit.params);
    let l0 = fit.params.lorentzian_fwhm;
    let restricted = (0..=2000)
        .map(|i| {
            let l = l0 * (0.8 + 0.6 * i as f64 / 2000.0);
            chi2(&LineshapeParams { lorentzian_fwhm: l, gaussian_fwhm: 0.0, ..fit.params })
        })
        .fold(f64::INFINITY, f64::min);
    assert!(restricted - best < 9.0, "Δχ² = {}", restricted - best);
    assert!(fit.params.gaussian_fwhm < 0.5 * truth.lorentzian_fwhm);
}

#[test]
fn ljung_box_detects_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = Normal::new(0.0, 1.0).unwrap();
    let white: Vec<f64> = (0..400).map(|_| n.sample(&mut rng)).collect();
    let (_, p) = ljung_box(&white, 10);
    assert!(p > 0.01, "{p}");
    let mut ar = vec![0.0; 400];
    for i in 1..400 {
        ar[i] = 0.7 * ar[i - 1] + white[i];
    }
    let (_, p) = ljung_box(&ar, 10);
    assert!(p < 1e-6, "{p}");
}

fn amplitudes_at(pos: &QDPosition) -> Vec<ModeAmplitude> {
    let cat = ModeCatalog::default_device();
    let a = forward_amplitudes(&cat, &LABELS, "B2", pos).unwrap();
    LABELS
        .iter()
        .zip(a)
        .map(|(l, amplitude)| ModeAmplitude { label: l.to_string(), amplitude })
        .collect()
}

#[test]
fn localization_examples() {
    let cat = ModeCatalog::default_device();
    let (r, _) = localize_qd(&amplitudes_at(&QDPosition::degrees(35.0, 20.0).unwrap()), &cat, &GridSpec::default())
        .unwrap();
    assert_eq!((r.r_nm, r.phi_deg), (35.0, 20.0));
    assert!(r.chi2 < 1e-12);

    // No F1x resonance, F1y and the breathing modes present.
    let mut amps = amplitudes_at(&QDPosition::degrees(60.0, 30.0).unwrap());
    amps.retain(|a| ["F1x", "F1y", "B1", "B2"].contains(&a.label.as_str()));
    amps.iter_mut().find(|a| a.label == "F1x").unwrap().amplitude = 0.0;
    let (r, _) = localize_qd(&amps, &cat, &GridSpec::default()).unwrap();
    assert_eq!((r.r_nm, r.phi_deg), (30.0, 90.0));

    let mirrored = QDPosition::canonical(35e-9, PI - 20f64.to_radians()).unwrap();
    let (m, _) = localize_qd(&amplitudes_at(&mirrored), &cat, &GridSpec::default()).unwrap();
    assert_eq!((m.r_nm, m.phi_deg), (35.0, 20.0));

    let breathing = vec![
        ModeAmplitude { label: "B1".into(), amplitude: 0.3 },
        ModeAmplitude { label: "B2".into(), amplitude: 1.0 },
    ];
    assert!(matches!(localize_qd(&breathing, &cat, &GridSpec::default()), Err(Error::Unresolvable(_))));
}

#[test]
fn coupling_fit_edge_cases() {
    let m = ModeCatalog::default_device().get("F1x").unwrap().clone();
    let line = LineshapeParams::new(hz(0.9e9), hz(1.4e9), 1e4, 0.0).unwrap();
    assert_eq!(predicted_area(hz(280e3), &line, 0.0, &m, 4.0), 0.0);
    let zero: Vec<AreaPoint> = [-1.0, 0.5, 1.0]
        .iter()
        .map(|k| AreaPoint { detuning: k * hz(1e9), area: 0.0, uncertainty: 1e-4 })
        .collect();
    assert!(matches!(extract_coupling(&zero, &line, &m, 4.0), Err(Error::NoSignal(_))));
    assert!(matches!(extract_coupling(&zero[..2], &line, &m, 4.0), Err(Error::Validation(_))));

    let spec = flat_spectrum(2e-5, 2_000_000, 1.0, Some(100.0));
    let s1 = displacement_sensitivity(&spec, &m, hz(280e3), &line, hz(0.9e9)).unwrap();
    let s2 = displacement_sensitivity(&spec, &m, hz(560e3), &line, hz(0.9e9)).unwrap();
    assert!((s2 / s1 - 0.5).abs() < 1e-12);
    assert!(matches!(
        displacement_sensitivity(&spec, &m, hz(280e3), &line, 0.0),
        Err(Error::DivergentSensitivity(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn localization_inverts_forward_model(r in 6u32..150, phi in 6u32..85) {
        let cat = ModeCatalog::default_device();
        let pos = QDPosition::degrees(r as f64, phi as f64).unwrap();
        let (res, _) = localize_qd(&amplitudes_at(&pos), &cat, &GridSpec::default()).unwrap();
        prop_assert_eq!((res.r_nm, res.phi_deg), (r as f64, phi as f64));
    }

    #[test]
    fn exact_areas_invert_to_injected_coupling(l in 10.0..5000.0f64) {
        let m = ModeCatalog::default_device().get("F1x").unwrap().clone();
        let line = LineshapeParams::new(hz(0.9e9), hz(1.4e9), 1e4, 0.0).unwrap();
        let lam = hz(l * 1e3);
        let pts: Vec<AreaPoint> = [-1.0, 0.0, 0.5, 1.0, 2.0]
            .iter()
            .map(|k| {
                let d = k * hz(1e9);
                AreaPoint { detuning: d, area: predicted_area(lam, &line, d, &m, 4.0), uncertainty: 0.0 }
            })
            .collect();
        let fit = extract_coupling(&pts, &line, &m, 4.0).unwrap();
        prop_assert!((fit.lambda / lam - 1.0).abs() < 1e-9);
    }
}
