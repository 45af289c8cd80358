//! Two-detector intensity correlation and its Fourier transform.

use super::spectrum::{SpectralResponse, Spectrum};
use crate::error::{ensure, invalid, Error, Result};
use crate::simulator::{to_ps, PhotonTags, PS};
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Normalized, symmetrized g²(τ) on bins centred at τ_k = k·bin_width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Table {
    /// s, from −τ_max to τ_max.
    pub tau: Vec<f64>,
    pub g2: Vec<f64>,
    /// s
    pub bin_width: f64,
    /// Combined detection rate of both channels, s⁻¹.
    pub mean_rate: f64,
    /// s
    pub duration: f64,
    /// Raw coincidence counts per bin, before symmetrization.
    pub coincidences: Vec<u64>,
    /// τ_max exceeds a tenth of the record.
    pub poor_statistics: bool,
}

impl G2Table {
    pub fn tau_max(&self) -> f64 {
        *self.tau.last().unwrap_or(&0.0)
    }

    /// Index of τ = 0.
    pub fn center(&self) -> usize {
        self.tau.len() / 2
    }

    pub fn write_csv<W: Write>(&self, header: &[String], mut w: W) -> Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "# mean_rate_per_s={}", self.mean_rate)?;
        writeln!(w, "# poor_statistics={}", self.poor_statistics)?;
        writeln!(w, "tau_s,g2,coincidences")?;
        for ((t, g), c) in self.tau.iter().zip(&self.g2).zip(&self.coincidences) {
            writeln!(w, "{t:.9e},{g:.9e},{c}")?;
        }
        Ok(())
    }
}

/// Cross-correlation histogram of channel 1 against channel 0, normalized so
/// that g² → 1 on the last decade of |τ| and symmetrized in τ.
pub fn g2_histogram(tags: &PhotonTags, bin_width: f64, tau_max: f64) -> Result<G2Table> {
    if tags.n_channels != 2 {
        return Err(Error::ChannelCount {
            expected: 2,
            found: tags.n_channels as usize,
        });
    }
    let b_ps = to_ps(bin_width) as i64;
    ensure(b_ps > 0, || "correlation bin width must be at least 1 ps".into())?;
    ensure(tau_max >= 10.0 * bin_width, || "tau_max must span at least ten bins".into())?;
    let c0 = tags.channel(0);
    let c1 = tags.channel(1);
    ensure(!c0.is_empty() && !c1.is_empty(), || "both correlation channels must be non-empty".into())?;
    let k_max = (tau_max / bin_width).round() as i64;
    let nb = (2 * k_max + 1) as usize;
    let reach = k_max * b_ps + b_ps / 2;
    let offset = k_max * b_ps + b_ps / 2;
    let mut hist = vec![0u64; nb];
    let mut lo = 0usize;
    for &t0 in &c0 {
        let t0 = t0 as i64;
        while lo < c1.len() && (c1[lo] as i64) < t0 - reach {
            lo += 1;
        }
        for &t1 in &c1[lo..] {
            let d = t1 as i64 - t0;
            if d >= reach + (b_ps - b_ps / 2) {
                break;
            }
            let k = (d + offset).div_euclid(b_ps);
            if (0..nb as i64).contains(&k) {
                hist[k as usize] += 1;
            }
        }
    }
    let duration = tags.duration();
    let bw = b_ps as f64 * PS;
    let (n0, n1) = (c0.len() as f64, c1.len() as f64);
    let tau: Vec<f64> = (-k_max..=k_max).map(|k| k as f64 * bw).collect();
    let mut g2: Vec<f64> = hist
        .iter()
        .zip(&tau)
        .map(|(&h, t)| {
            let overlap = (duration - t.abs()).max(bw);
            h as f64 / (n0 * n1 * bw * overlap / (duration * duration))
        })
        .collect();
    for k in 0..k_max as usize {
        let j = nb - 1 - k;
        let m = 0.5 * (g2[k] + g2[j]);
        g2[k] = m;
        g2[j] = m;
    }
    // Plateau: τ_max/10 ≤ |τ| ≤ τ_max, read from the (symmetrized) negative side.
    let lim = k_max as usize - k_max as usize / 10;
    let level = g2[..=lim].iter().sum::<f64>() / (lim + 1) as f64;
    ensure(level > 0.0, || "no coincidences on the long-delay plateau".into())?;
    for g in &mut g2 {
        *g /= level;
    }
    Ok(G2Table {
        tau,
        g2,
        bin_width: bw,
        mean_rate: (n0 + n1) / duration,
        duration,
        coincidences: hist,
        poor_statistics: tau_max > duration / 10.0,
    })
}

/// One-sided NPSD from a correlation table: 2/⟨Ṅ_d⟩ + 4∫_{τ_min}^{τ_max}(g² − 1)cos(2πfτ)dτ.
/// `pad` sets the zero-padding factor of the transform (frequency spacing
/// 1/(pad·τ_max)).
pub fn npsd_from_g2(table: &G2Table, tau_min: f64, pad: usize) -> Result<Spectrum> {
    ensure(table.tau.len() >= 3, || "correlation table is empty".into())?;
    let tau_max = table.tau_max();
    if tau_min >= tau_max {
        return invalid(format!("tau_min {tau_min:e} s must be below tau_max {tau_max:e} s"));
    }
    ensure(tau_min >= 0.0, || "tau_min must be non-negative".into())?;
    ensure(table.mean_rate > 0.0, || "correlation table has no mean rate".into())?;
    let c = table.center();
    let b = table.bin_width;
    let k_max = table.tau.len() - 1 - c;
    let n = ((k_max + 1) * pad.max(1)).next_power_of_two();
    let mut buf = vec![0.0; n];
    for k in 0..=k_max {
        let t = k as f64 * b;
        if t >= tau_min - 1e-3 * b {
            // Half weight at τ = 0 for the trapezoid rule.
            let w = if k == 0 { 0.5 } else { 1.0 };
            buf[k] = w * (table.g2[c + k] - 1.0);
        }
    }
    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut out = fft.make_output_vec();
    fft.process(&mut buf, &mut out).expect("fft buffer sizes match");
    let floor = 2.0 / table.mean_rate;
    let df = 1.0 / (n as f64 * b);
    let rbw = df.max(1.0 / (2.0 * tau_max));
    Ok(Spectrum {
        frequencies: (0..out.len()).map(|j| j as f64 * df).collect(),
        density: out.iter().map(|z| floor + 4.0 * b * z.re).collect(),
        one_sided: true,
        mean_rate: table.mean_rate,
        rbw,
        response: SpectralResponse::CorrelationBinning { bin_width: b },
        averages: None,
        // Estimates Δf apart correlate as sinc(2πΔf·τ_max); Σρ = rbw/df.
        bin_correlation: rbw / df,
    })
}
