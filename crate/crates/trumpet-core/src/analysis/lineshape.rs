//! Voigt fits to fluorescence scans.

use crate::emitter::LineshapeParams;
use crate::error::{ensure, invalid, Error, Result};
use crate::optimize::{levenberg_marquardt, LmOptions};
use crate::simulator::SimConfig;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// One point of a fluorescence scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfPoint {
    /// rad/s
    pub detuning: f64,
    /// Detected counts/s.
    pub rate: f64,
    /// Standard error of `rate`; zero for unweighted data.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfFit {
    pub params: LineshapeParams,
    /// Standard errors of (amplitude, center, Lorentzian FWHM, Gaussian FWHM);
    /// NaN where the curvature matrix is singular.
    pub std_errors: [f64; 4],
    pub reduced_chi2: f64,
    pub ljung_box_q: f64,
    pub ljung_box_p: f64,
    /// Residuals pass the Ljung–Box test at the 5 % level.
    pub white: bool,
    pub iterations: usize,
}

/// Ljung–Box statistic of a residual sequence and its p-value with `lags` degrees of freedom.
pub fn ljung_box(residuals: &[f64], lags: usize) -> (f64, f64) {
    let n = residuals.len();
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = residuals.iter().map(|r| r - mean).collect();
    let c0: f64 = d.iter().map(|v| v * v).sum();
    if c0 == 0.0 || lags == 0 {
        return (0.0, 1.0);
    }
    let q = (1..=lags.min(n - 1))
        .map(|k| {
            let ck: f64 = d[..n - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum();
            let rho = ck / c0;
            rho * rho / (n - k) as f64
        })
        .sum::<f64>()
        * (n * (n + 2)) as f64;
    let p = ChiSquared::new(lags as f64).map(|c| 1.0 - c.cdf(q)).unwrap_or(f64::NAN);
    (q, p)
}

fn half_max_width(points: &[RfPoint]) -> f64 {
    let peak = points.iter().map(|p| p.rate).fold(f64::MIN, f64::max);
    let above: Vec<f64> = points.iter().filter(|p| p.rate >= 0.5 * peak).map(|p| p.detuning).collect();
    let lo = above.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = above.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spacing = (points.last().unwrap().detuning - points[0].detuning) / (points.len() - 1) as f64;
    (hi - lo).max(spacing)
}

/// Levenberg–Marquardt Voigt fit on (amplitude, center, L-FWHM, G-FWHM), with
/// widths projected onto ≥ 0 and parameters scaled to order one internally.
pub fn fit_rf_spectrum(points: &[RfPoint]) -> Result<RfFit> {
    ensure(points.len() >= 10, || {
        format!("lineshape fit needs at least 10 points, got {}", points.len())
    })?;
    ensure(
        points.iter().all(|p| p.detuning.is_finite() && p.rate.is_finite() && p.sigma >= 0.0),
        || "scan contains non-finite values or negative uncertainties".into(),
    )?;
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.detuning.total_cmp(&b.detuning));
    let weighted = pts.iter().all(|p| p.sigma > 0.0);
    let a_scale = pts.iter().map(|p| p.rate.abs()).fold(0.0, f64::max);
    ensure(a_scale > 0.0, || "scan has no signal".into())?;
    let w_est = half_max_width(&pts);
    let x_scale = w_est;
    let peak_idx = pts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.rate.total_cmp(&b.1.rate))
        .map(|(i, _)| i)
        .unwrap();
    let x0 = [1.0, pts[peak_idx].detuning / x_scale, 0.5, 0.7];
    let model = |p: &[f64]| LineshapeParams {
        lorentzian_fwhm: p[2] * x_scale,
        gaussian_fwhm: p[3] * x_scale,
        amplitude: p[0] * a_scale,
        center: p[1] * x_scale,
    };
    let resid = |p: &[f64]| -> Vec<f64> {
        let m = model(p);
        pts.iter()
            .map(|q| {
                let r = (m.rate(q.detuning) - q.rate) / a_scale;
                if weighted {
                    r * a_scale / q.sigma
                } else {
                    r
                }
            })
            .collect()
    };
    let project = |p: &mut [f64]| {
        p[2] = p[2].max(0.0);
        p[3] = p[3].max(0.0);
        if p[2] + p[3] < 1e-6 {
            p[2] = 1e-6;
        }
    };
    let opts = LmOptions {
        max_iterations: 500,
        ..LmOptions::default()
    };
    let res = levenberg_marquardt(resid, project, &x0, &opts)?;
    let params = model(&res.params);
    params.validate()?;
    let n = pts.len();
    let dof = (n - 4) as f64;
    let reduced_chi2 = res.cost / dof;
    let s2 = if weighted { 1.0 } else { reduced_chi2 };
    let scales = [a_scale, x_scale, x_scale, x_scale];
    let std_errors = match &res.jtj_inverse {
        Some(inv) => {
            let mut e = [0.0; 4];
            for i in 0..4 {
                e[i] = (s2 * inv[i * 4 + i]).max(0.0).sqrt() * scales[i];
            }
            e
        }
        None => [f64::NAN; 4],
    };
    if !reduced_chi2.is_finite() {
        return Err(Error::FitFailure {
            iterations: res.iterations,
            cost: res.cost,
            reason: "non-finite residuals at the solution".into(),
        });
    }
    let fwhm = 2.0 * params.hwhm();
    let span = pts[n - 1].detuning - pts[0].detuning;
    if span <= 3.0 * fwhm {
        return invalid(format!(
            "scan spans {:.3} FWHM; at least 3 are needed",
            span / fwhm
        ));
    }
    let lags = (n / 5).clamp(1, 10);
    let (q, p) = ljung_box(&res.residuals, lags);
    Ok(RfFit {
        params,
        std_errors,
        reduced_chi2,
        ljung_box_q: q,
        ljung_box_p: p,
        white: p > 0.05,
        iterations: res.iterations,
    })
}

/// Detected rate at each detuning from independent short records of `cfg`
/// (same mechanics, blinking and detectors), each lasting `dwell` seconds.
pub fn simulate_rf_scan(cfg: &SimConfig, detunings: &[f64], dwell: f64) -> Result<Vec<RfPoint>> {
    ensure(dwell > 0.0, || "dwell time must be positive".into())?;
    detunings
        .par_iter()
        .enumerate()
        .map(|(i, &d)| {
            let mut c = cfg.reseeded(0x5CA4 + i as u64);
            c.drive = c.drive.at(d);
            c.duration = dwell;
            let tags = c.run()?;
            let n = tags.len() as f64;
            Ok(RfPoint {
                detuning: d,
                rate: n / dwell,
                sigma: n.max(1.0).sqrt() / dwell,
            })
        })
        .collect()
}
