use super::{read_record, read_rf_scan, Record};
use crate::config::{load_catalog, AnalyzeConfig, LineshapeSpec, Loaded};
use crate::error::{invalid, CliError, CliResult};
use crate::output::{config_line, hex, OutDir};
use crate::svg::{Plot, Series, PALETTE};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use trumpet_core::analysis::*;
use trumpet_core::emitter::LineshapeParams;
use trumpet_core::mechanics::ModeCatalog;
use trumpet_core::units::{hz, to_hz};

#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct PeakRow {
    pub label: Option<String>,
    pub mode: Option<String>,
    pub center_Hz: f64,
    pub area: f64,
    pub uncertainty: f64,
    pub significance: f64,
    pub floor_per_Hz: f64,
    pub clipped: bool,
    pub catalog_freq_Hz: Option<f64>,
    pub relative_error: Option<f64>,
    pub window_low_Hz: f64,
    pub window_high_Hz: f64,
}

impl PeakRow {
    fn new(p: &PeakResult, mode: Option<String>, catalog_freq: Option<f64>, rel: Option<f64>) -> Self {
        PeakRow {
            label: p.label.clone(),
            mode,
            center_Hz: p.center,
            area: p.area,
            uncertainty: p.uncertainty,
            significance: p.significance(),
            floor_per_Hz: p.floor,
            clipped: p.clipped,
            catalog_freq_Hz: catalog_freq,
            relative_error: rel,
            window_low_Hz: p.window.low,
            window_high_Hz: p.window.high,
        }
    }
}

pub struct AnalyzeOptions {
    pub input: PathBuf,
    pub g2: bool,
}

#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct SensitivityResult {
    pub mode: String,
    pub sqrt_s_xx_m_per_sqrt_Hz: f64,
    pub floor_per_Hz: f64,
}

pub struct AnalyzeReport {
    pub mean_rate: f64,
    pub rbw: f64,
    pub peaks: Vec<PeakRow>,
    pub peaks_g2: Option<Vec<PeakRow>>,
    pub localization: Option<LocalizationResult>,
    pub rf_fit: Option<RfFit>,
    pub coupling: Option<CouplingFit>,
    pub sensitivity: Option<SensitivityResult>,
    pub notes: Vec<String>,
}

fn spectrum_of(rec: &Record, c: &AnalyzeConfig) -> CliResult<Spectrum> {
    let window = c.window.build();
    match rec {
        Record::Tags(t) => {
            let n = (t.duration() / c.bin_s).floor() as usize;
            let seg = c.segment_bins.unwrap_or_else(|| default_segment_len(n, 8));
            Ok(tags_npsd(t, c.bin_s, seg, window, c.channel)?)
        }
        Record::Trace(tr) => {
            let seg = c.segment_bins.unwrap_or_else(|| default_segment_len(tr.counts.len(), 8));
            Ok(trace_npsd(tr, seg, window)?)
        }
    }
}

fn peaks_of(spec: &Spectrum, c: &AnalyzeConfig, cat: &ModeCatalog) -> CliResult<Vec<PeakRow>> {
    let mut rows = Vec::new();
    if !c.windows.is_empty() {
        let windows: Vec<PeakWindow> = c
            .windows
            .iter()
            .map(|w| PeakWindow::around(w.label.as_deref(), w.center_Hz, w.half_width_Hz))
            .collect();
        for p in find_peaks_and_areas(spec, &windows)? {
            let known = p.label.as_deref().and_then(|l| cat.get(l));
            let mode = known.filter(|_| p.significance() >= c.min_significance).map(|m| m.label.clone());
            let f = known.map(|m| m.freq_hz());
            let rel = f.map(|f| (p.center - f).abs() / f);
            rows.push(PeakRow::new(&p, mode, f, rel));
        }
    } else {
        let windows = detect_windows(spec, c.threshold_sigma, c.f_min_Hz)?;
        if windows.is_empty() {
            return Ok(rows);
        }
        let peaks = find_peaks_and_areas(spec, &windows)?;
        let (strong, weak): (Vec<_>, Vec<_>) = peaks.into_iter().partition(|p| p.significance() >= c.min_significance);
        if !strong.is_empty() {
            for a in assign_modes(&strong, cat, c.match_tolerance)? {
                rows.push(PeakRow::new(&a.peak, a.mode.clone(), a.catalog_frequency, a.relative_error));
            }
        }
        rows.extend(weak.iter().map(|p| PeakRow::new(p, None, None, None)));
    }
    rows.sort_by(|a, b| a.center_Hz.total_cmp(&b.center_Hz));
    Ok(rows)
}

fn peaks_csv(rows: &[PeakRow], header: &str) -> String {
    let mut s = format!(
        "# {header}\nlabel,mode,center_Hz,area,uncertainty,significance,floor_per_Hz,clipped,catalog_freq_Hz,relative_error,window_low_Hz,window_high_Hz\n"
    );
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.9e}")).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.9e},{:.9e},{:.4},{:.9e},{},{},{},{:.6},{:.6}",
            r.label.as_deref().unwrap_or(""),
            r.mode.as_deref().unwrap_or(""),
            r.center_Hz,
            r.area,
            r.uncertainty,
            r.significance,
            r.floor_per_Hz,
            r.clipped,
            opt(r.catalog_freq_Hz),
            opt(r.relative_error),
            r.window_low_Hz,
            r.window_high_Hz
        );
    }
    s
}

fn spectrum_csv(spec: &Spectrum, header: &str) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    spec.write_csv(&[header.to_string()], &mut buf)?;
    Ok(buf)
}

/// Spectrum with the shot-noise floor and labeled mode peaks.
pub fn spectrum_svg(spec: &Spectrum, rows: &[PeakRow], title: &str, metadata: &str) -> String {
    let points: Vec<(f64, f64)> = spec
        .frequencies
        .iter()
        .zip(&spec.density)
        .filter(|(f, _)| **f > 0.0)
        .map(|(f, s)| (*f, *s))
        .collect();
    let labels = rows
        .iter()
        .filter_map(|r| {
            let m = r.mode.clone()?;
            let i0 = spec.index_of(r.window_low_Hz);
            let i1 = spec.index_of(r.window_high_Hz).max(i0);
            let y = spec.density[i0..=i1.min(spec.density.len() - 1)].iter().copied().fold(f64::MIN, f64::max);
            Some((r.center_Hz, y, m))
        })
        .collect();
    Plot {
        title: title.into(),
        x_label: "frequency (Hz)".into(),
        y_label: "NPSD (1/Hz)".into(),
        x_log: true,
        y_log: true,
        series: vec![Series::new("NPSD", points, PALETTE[0])],
        hlines: vec![(spec.shot_noise(), "shot noise 2/⟨Ṅ_d⟩".into())],
        labels,
        metadata: metadata.into(),
    }
    .render()
}

fn lineshape(cfg: &Loaded<AnalyzeConfig>, notes: &mut Vec<String>) -> CliResult<(LineshapeParams, Option<RfFit>)> {
    let c = &cfg.value;
    if let Some(p) = &c.rf_scan {
        let path = cfg.file("rf_scan", p)?;
        let pts = read_rf_scan(&path)?;
        let fit = fit_rf_spectrum(&pts).map_err(|e| CliError::from(e).context("RF scan fit"))?;
        if !fit.white {
            notes.push(format!("RF fit residuals are not white (Ljung–Box p = {:.3})", fit.ljung_box_p));
        }
        return Ok((fit.params, Some(fit)));
    }
    let spec = c.lineshape.unwrap_or_else(LineshapeSpec::device);
    Ok((spec.build()?, None))
}

fn coupling_svg(points: &[AreaPoint], fit: &CouplingFit, line: &LineshapeParams, cfg: &Loaded<AnalyzeConfig>, cat: &ModeCatalog, meta: &str) -> CliResult<String> {
    let cp = cfg.value.coupling.as_ref().expect("coupling block");
    let mode = cat.get(&cp.mode).expect("checked mode");
    let lo = points.iter().map(|p| p.detuning).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.detuning).fold(f64::NEG_INFINITY, f64::max);
    let curve: Vec<(f64, f64)> = (0..=400)
        .map(|i| {
            let d = lo + (hi - lo) * i as f64 / 400.0;
            (to_hz(d) / 1e9, predicted_area(fit.lambda, line, d, mode, cp.temperature_K))
        })
        .collect();
    let measured: Vec<(f64, f64)> = points.iter().map(|p| (to_hz(p.detuning) / 1e9, p.area)).collect();
    let labels = measured.iter().map(|&(x, y)| (x, y, "●".to_string())).collect();
    Ok(Plot {
        title: format!("{} peak area, λ/2π = {:.1} kHz", cp.mode, to_hz(fit.lambda) / 1e3),
        x_label: "detuning Δ/2π (GHz)".into(),
        y_label: "area".into(),
        series: vec![Series::new("fit", curve, PALETTE[1]), Series::new("measured", measured, PALETTE[0]).dashed()],
        labels,
        metadata: meta.into(),
        ..Plot::default()
    }
    .render())
}

pub fn run(cfg: &Loaded<AnalyzeConfig>, opts: &AnalyzeOptions, out: &Path) -> CliResult<AnalyzeReport> {
    cfg.validate()?;
    let c = &cfg.value;
    let catalog_path = match &c.catalog {
        Some(p) => Some(cfg.file("catalog", p)?),
        None => None,
    };
    let cat = load_catalog(catalog_path.as_deref())?;
    let bytes = std::fs::read(&opts.input)
        .map_err(|e| CliError::Validation(format!("{}: cannot read: {e}", opts.input.display())))?;
    let input_digest = hex(&Sha256::digest(&bytes));
    drop(bytes);
    let rec = read_record(&opts.input)?;
    if opts.g2 {
        match &rec {
            Record::Trace(_) => return invalid("--g2 needs a photon tag record, not a binned trace"),
            Record::Tags(t) if t.n_channels != 2 => {
                return Err(trumpet_core::Error::ChannelCount {
                    expected: 2,
                    found: t.n_channels as usize,
                }
                .into())
            }
            _ => {}
        }
    }
    let echo = json!({
        "analyze": c,
        "input": opts.input.display().to_string(),
        "input_sha256": input_digest,
        "g2": opts.g2,
    });
    let header = config_line(&echo);
    let meta = header.clone();
    let mut dir = OutDir::create(out)?;
    let mut notes = Vec::new();

    let spec = spectrum_of(&rec, c)?;
    let rows = peaks_of(&spec, c, &cat)?;
    dir.write("spectrum.csv", &spectrum_csv(&spec, &header)?)?;
    dir.write("peaks.csv", peaks_csv(&rows, &header).as_bytes())?;
    dir.write("spectrum.svg", spectrum_svg(&spec, &rows, "Count-rate NPSD", &meta).as_bytes())?;

    let mut rows_g2 = None;
    let mut rbw_g2 = None;
    if opts.g2 {
        let Record::Tags(tags) = &rec else { unreachable!() };
        let g = &c.g2;
        let table = g2_histogram(tags, g.bin_s, g.tau_max_s)?;
        if table.poor_statistics {
            notes.push("g² window exceeds a tenth of the record: poor statistics".into());
        }
        let mut buf = Vec::new();
        table.write_csv(std::slice::from_ref(&header), &mut buf)?;
        dir.write("g2.csv", &buf)?;
        let sg = npsd_from_g2(&table, g.tau_min_s, g.pad)?;
        let r = peaks_of(&sg, c, &cat)?;
        dir.write("spectrum_g2.csv", &spectrum_csv(&sg, &header)?)?;
        dir.write("peaks_g2.csv", peaks_csv(&r, &header).as_bytes())?;
        dir.write("spectrum_g2.svg", spectrum_svg(&sg, &r, "NPSD from g²(τ)", &meta).as_bytes())?;
        rows_g2 = Some(r);
        rbw_g2 = Some(sg.rbw);
    }

    let mut localization = None;
    if c.localize {
        let source = rows_g2.as_ref().unwrap_or(&rows);
        let amps: Vec<ModeAmplitude> = source
            .iter()
            .filter_map(|r| {
                Some(ModeAmplitude {
                    label: r.mode.clone()?,
                    amplitude: r.area,
                })
            })
            .collect();
        if amps.len() >= 2 && amps.iter().any(|a| a.label == c.reference) {
            let grid = GridSpec {
                reference: c.reference.clone(),
                ..GridSpec::default()
            };
            match localize_qd(&amps, &cat, &grid) {
                Ok((res, map)) => {
                    dir.write_json("localization.json", &json!({ "config": echo, "result": res }))?;
                    dir.write("residual_map.csv", super::localize::residual_csv(&map, &header).as_bytes())?;
                    localization = Some(res);
                }
                Err(e) => notes.push(format!("localization skipped: {e}")),
            }
        } else {
            notes.push(format!(
                "localization skipped: needs at least two assigned modes including {}",
                c.reference
            ));
        }
    }

    let needs_line = c.coupling.is_some() || c.sensitivity.is_some() || c.rf_scan.is_some();
    let (line, rf_fit) = if needs_line {
        let (l, f) = lineshape(cfg, &mut notes)?;
        (Some(l), f)
    } else {
        (None, None)
    };
    if let Some(f) = &rf_fit {
        dir.write_json("rf_fit.json", &json!({ "config": echo, "fit": f }))?;
    }

    let mut coupling = None;
    if let Some(cp) = &c.coupling {
        let line = line.as_ref().expect("lineshape");
        let mode = cat
            .get(&cp.mode)
            .ok_or_else(|| cfg.error("coupling", format!("mode {} is not in the catalog", cp.mode)))?;
        let window = PeakWindow::around(Some(&cp.mode), mode.freq_hz(), cp.half_width_Hz);
        let mut points = Vec::with_capacity(cp.records.len());
        for r in &cp.records {
            let path = cfg.file("records", &r.input)?;
            let rs = spectrum_of(&read_record(&path)?, c)?;
            let p = find_peaks_and_areas(&rs, std::slice::from_ref(&window))?.remove(0);
            points.push(AreaPoint {
                detuning: hz(r.detuning_over_2pi_Hz),
                area: p.area,
                uncertainty: p.uncertainty,
            });
        }
        let fit = extract_coupling(&points, line, mode, cp.temperature_K)?;
        let mut s = format!("# {header}\ndetuning_over_2pi_Hz,area,uncertainty,predicted\n");
        for p in &points {
            let _ = writeln!(
                s,
                "{:.9e},{:.9e},{:.9e},{:.9e}",
                to_hz(p.detuning),
                p.area,
                p.uncertainty,
                predicted_area(fit.lambda, line, p.detuning, mode, cp.temperature_K)
            );
        }
        dir.write("coupling.csv", s.as_bytes())?;
        dir.write_json(
            "coupling.json",
            &json!({
                "config": echo,
                "mode": cp.mode,
                "lambda_over_2pi_Hz": to_hz(fit.lambda),
                "std_error_over_2pi_Hz": to_hz(fit.std_error()),
                "residual": fit.residual,
                "points": fit.points,
            }),
        )?;
        dir.write("coupling.svg", coupling_svg(&points, &fit, line, cfg, &cat, &meta)?.as_bytes())?;
        coupling = Some(fit);
    }

    let mut sensitivity = None;
    if let Some(sp) = &c.sensitivity {
        let line = line.as_ref().expect("lineshape");
        let mode = cat
            .get(&sp.mode)
            .ok_or_else(|| cfg.error("sensitivity", format!("mode {} is not in the catalog", sp.mode)))?;
        let s = displacement_sensitivity(&spec, mode, hz(sp.lambda_over_2pi_Hz), line, hz(sp.detuning_over_2pi_Hz))?;
        let f = mode.freq_hz();
        let res = SensitivityResult {
            mode: sp.mode.clone(),
            sqrt_s_xx_m_per_sqrt_Hz: s,
            floor_per_Hz: floor_between(&spec, 0.9 * f, 1.1 * f)?,
        };
        dir.write_json("sensitivity.json", &json!({ "config": echo, "result": res }))?;
        sensitivity = Some(res);
    }

    let summary = json!({
        "config": echo,
        "mean_rate_per_s": spec.mean_rate,
        "rbw_Hz": spec.rbw,
        "rbw_g2_Hz": rbw_g2,
        "sensitivity": sensitivity,
        "coupling_over_2pi_Hz": coupling.as_ref().map(|f| to_hz(f.lambda)),
        "peaks": rows,
        "peaks_g2": rows_g2,
        "localization": localization,
        "notes": notes,
    });
    dir.write_json("summary.json", &summary)?;
    dir.finish("analyze", echo)?;
    Ok(AnalyzeReport {
        mean_rate: spec.mean_rate,
        rbw: spec.rbw,
        peaks: rows,
        peaks_g2: rows_g2,
        localization,
        rf_fit,
        coupling,
        sensitivity,
        notes,
    })
}
