//! Peak areas above the shot-noise floor and catalog matching.

use super::spectrum::Spectrum;
use crate::error::{ensure, invalid, Result};
use crate::mechanics::ModeCatalog;
use serde::{Deserialize, Serialize};

/// Relative tolerance for matching a measured peak to a catalog frequency.
pub const DEFAULT_MATCH_TOLERANCE: f64 = 0.075;

/// Integration window, Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakWindow {
    pub label: Option<String>,
    pub low: f64,
    pub high: f64,
}

impl PeakWindow {
    pub fn around(label: Option<&str>, center: f64, half_width: f64) -> Self {
        PeakWindow {
            label: label.map(str::to_owned),
            low: center - half_width,
            high: center + half_width,
        }
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakResult {
    pub label: Option<String>,
    /// Excess-weighted centroid, Hz.
    pub center: f64,
    /// ∫(S − floor)df, corrected for the estimator response, clipped at 0.
    pub area: f64,
    /// 1/Hz
    pub floor: f64,
    pub uncertainty: f64,
    /// The raw area was negative and has been set to 0.
    pub clipped: bool,
    pub window: PeakWindow,
}

impl PeakResult {
    /// Area in units of its uncertainty.
    pub fn significance(&self) -> f64 {
        if self.uncertainty > 0.0 {
            self.area / self.uncertainty
        } else {
            f64::INFINITY
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Integrates each window above a floor taken as the median of two
/// sidebands of the window's own width.
pub fn find_peaks_and_areas(spec: &Spectrum, windows: &[PeakWindow]) -> Result<Vec<PeakResult>> {
    spec.validate()?;
    let f_lo = spec.frequencies[0];
    let f_hi = *spec.frequencies.last().unwrap();
    let mut sorted: Vec<&PeakWindow> = windows.iter().collect();
    sorted.sort_by(|a, b| a.low.total_cmp(&b.low));
    for w in &sorted {
        ensure(w.high > w.low, || format!("window [{}, {}] Hz is empty", w.low, w.high))?;
        if w.low < f_lo || w.high > f_hi {
            return invalid(format!(
                "window [{:.6e}, {:.6e}] Hz lies outside the spectrum grid [{f_lo:.6e}, {f_hi:.6e}]",
                w.low, w.high
            ));
        }
    }
    ensure(sorted.windows(2).all(|p| p[0].high <= p[1].low), || "peak windows overlap".into())?;
    let df = spec.df();
    windows
        .iter()
        .map(|w| {
            let i0 = spec.frequencies.partition_point(|&f| f < w.low);
            let i1 = spec.frequencies.partition_point(|&f| f <= w.high);
            ensure(i1 > i0, || "window contains no spectral bins".into())?;
            let n_in = i1 - i0;
            let side = n_in.max(8);
            let mut band: Vec<f64> = Vec::with_capacity(2 * side);
            band.extend_from_slice(&spec.density[i0.saturating_sub(side)..i0]);
            band.extend_from_slice(&spec.density[i1..(i1 + side).min(spec.density.len())]);
            ensure(band.len() >= 4, || "window leaves no sideband for the floor estimate".into())?;
            let m = band.len();
            let floor = median(&mut band);
            let excess: Vec<f64> = spec.density[i0..i1].iter().map(|s| s - floor).collect();
            let raw: f64 = excess.iter().sum::<f64>() * df;
            let (num, den) = excess
                .iter()
                .zip(&spec.frequencies[i0..i1])
                .filter(|(e, _)| **e > 0.0)
                .fold((0.0, 0.0), |(n, d), (e, f)| (n + e * f, d + e));
            let center = if den > 0.0 { num / den } else { 0.5 * (w.low + w.high) };
            let (var_sum, sigma_floor) = match spec.averages {
                Some(k) => {
                    let s2: f64 = spec.density[i0..i1].iter().map(|s| s * s).sum();
                    let corr = spec.bin_correlation;
                    // Median of m χ²-distributed bins: variance ≈ (π/2)·S²/(k·m).
                    (corr * s2 / k, floor * (std::f64::consts::FRAC_PI_2 * corr / (k * m as f64)).sqrt())
                }
                None => {
                    let mut dev: Vec<f64> = band.iter().map(|s| (s - floor).abs()).collect();
                    let sd = 1.4826 * median(&mut dev);
                    let corr = spec.bin_correlation.max(1.0);
                    (corr * n_in as f64 * sd * sd, sd * (std::f64::consts::FRAC_PI_2 * corr / m as f64).sqrt())
                }
            };
            let gain = spec.response.gain(center);
            let gain = if gain > 1e-6 { gain } else { 1.0 };
            let uncertainty = (var_sum * df * df + (n_in as f64 * df * sigma_floor).powi(2)).sqrt() / gain;
            let area = raw / gain;
            Ok(PeakResult {
                label: w.label.clone(),
                center,
                area: area.max(0.0),
                floor,
                uncertainty,
                clipped: area < 0.0,
                window: w.clone(),
            })
        })
        .collect()
}

/// Locates candidate peaks as runs of bins whose running average exceeds a
/// running-median floor by `threshold` standard errors. Returns windows
/// widened by the run length on each side.
pub fn detect_windows(spec: &Spectrum, threshold: f64, f_min: f64) -> Result<Vec<PeakWindow>> {
    spec.validate()?;
    let n = spec.density.len();
    let half = 64usize;
    let smooth = 3usize;
    let mut floor = vec![0.0; n];
    let mut buf = Vec::with_capacity(2 * half + 1);
    for i in (0..n).step_by(16) {
        buf.clear();
        buf.extend_from_slice(&spec.density[i.saturating_sub(half)..(i + half + 1).min(n)]);
        let m = median(&mut buf);
        for f in floor.iter_mut().skip(i).take(16) {
            *f = m;
        }
    }
    // Relative scatter of a single bin: χ² statistics when the number of
    // averages is known, otherwise a robust estimate from the spectrum itself.
    let rel_sd = match spec.averages {
        Some(k) => 1.0 / k.sqrt(),
        None => {
            let mut dev: Vec<f64> = (0..n)
                .filter(|&i| spec.frequencies[i] >= f_min && floor[i] > 0.0)
                .map(|i| (spec.density[i] / floor[i] - 1.0).abs())
                .collect();
            if dev.is_empty() {
                return Ok(Vec::new());
            }
            1.4826 * median(&mut dev)
        }
    };
    let se = rel_sd * (spec.bin_correlation.max(1.0) / (2 * smooth + 1) as f64).sqrt();
    let mut hot = vec![false; n];
    for i in smooth..n.saturating_sub(smooth) {
        if spec.frequencies[i] < f_min {
            continue;
        }
        let avg = spec.density[i - smooth..=i + smooth].iter().sum::<f64>() / (2 * smooth + 1) as f64;
        hot[i] = floor[i] > 0.0 && avg > floor[i] * (1.0 + threshold * se);
    }
    let mut out: Vec<PeakWindow> = Vec::new();
    let mut i = 0;
    while i < n {
        if !hot[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && hot[i] {
            i += 1;
        }
        let len = (i - start).max(4);
        let lo = start.saturating_sub(len);
        let hi = (i + len).min(n - 1);
        let w = PeakWindow {
            label: None,
            low: spec.frequencies[lo],
            high: spec.frequencies[hi],
        };
        match out.last_mut() {
            Some(prev) if prev.high >= w.low => prev.high = w.high,
            _ => out.push(w),
        }
    }
    // Keep room for at least one sideband.
    let (f0, f1) = (spec.frequencies[0], spec.frequencies[n - 1]);
    out.retain(|w| w.low - w.width() >= f0 || w.high + w.width() <= f1);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAssignment {
    pub peak: PeakResult,
    /// Catalog label, or None when unmatched.
    pub mode: Option<String>,
    pub catalog_frequency: Option<f64>,
    pub relative_error: Option<f64>,
}

/// Greedy nearest-frequency matching: pairs are taken in order of increasing
/// relative error |f_peak − f_mode|/f_mode, each peak and mode used once.
pub fn assign_modes(peaks: &[PeakResult], catalog: &ModeCatalog, tolerance: f64) -> Result<Vec<ModeAssignment>> {
    ensure(!catalog.modes.is_empty(), || "catalog is empty".into())?;
    ensure(tolerance >= 0.0, || "tolerance must be non-negative".into())?;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in peaks.iter().enumerate() {
        for (j, m) in catalog.modes.iter().enumerate() {
            let f = m.freq_hz();
            let rel = (p.center - f).abs() / f;
            // Small slack so that boundary cases quoted to finite precision match.
            if rel <= tolerance * (1.0 + 1e-6) {
                pairs.push((rel, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut peak_used = vec![None; peaks.len()];
    let mut mode_used = vec![false; catalog.modes.len()];
    for (rel, i, j) in pairs {
        if peak_used[i].is_none() && !mode_used[j] {
            peak_used[i] = Some((j, rel));
            mode_used[j] = true;
        }
    }
    Ok(peaks
        .iter()
        .zip(peak_used)
        .map(|(p, m)| {
            let mut peak = p.clone();
            match m {
                Some((j, rel)) => {
                    let mode = &catalog.modes[j];
                    peak.label = Some(mode.label.clone());
                    ModeAssignment {
                        peak,
                        mode: Some(mode.label.clone()),
                        catalog_frequency: Some(mode.freq_hz()),
                        relative_error: Some(rel),
                    }
                }
                None => {
                    peak.label = None;
                    ModeAssignment {
                        peak,
                        mode: None,
                        catalog_frequency: None,
                        relative_error: None,
                    }
                }
            }
        })
        .collect())
}
