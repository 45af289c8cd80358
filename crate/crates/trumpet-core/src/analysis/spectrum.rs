//! Welch estimation of the normalized noise power spectral density.

use crate::error::{ensure, invalid, Result};
use crate::simulator::{PhotonTags, TimeTrace, PS};
use rayon::prelude::*;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::f64::consts::PI;
use std::io::Write;

/// Transfer function applied to a fluctuation signal by the estimator itself.
/// Shot noise is unaffected; modulation peaks are attenuated by `gain(f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpectralResponse {
    Flat,
    /// Counting in bins of width T: sinc²(πfT).
    CountBinning { bin_width: f64 },
    /// Correlation histogram with bin width T: sinc(πfT).
    CorrelationBinning { bin_width: f64 },
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

impl SpectralResponse {
    pub fn gain(&self, f: f64) -> f64 {
        match *self {
            SpectralResponse::Flat => 1.0,
            SpectralResponse::CountBinning { bin_width } => sinc(PI * f * bin_width).powi(2),
            SpectralResponse::CorrelationBinning { bin_width } => sinc(PI * f * bin_width),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n)
                .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
                .collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }

    /// Equivalent noise bandwidth in bins.
    pub fn enbw(self) -> f64 {
        match self {
            Window::Hann => 1.5,
            Window::Rectangular => 1.0,
        }
    }

    /// Σ_j ρ_j² over neighbouring-bin power correlations (ρ_0 = 1), used to
    /// propagate noise through sums of adjacent bins.
    pub fn bin_correlation(self) -> f64 {
        match self {
            Window::Hann => 1.0 + 2.0 * (4.0 / 9.0 + 1.0 / 36.0),
            Window::Rectangular => 1.0,
        }
    }

    /// Overlap correlation of 50 % overlapped segments.
    fn overlap_correlation(self) -> f64 {
        match self {
            Window::Hann => 0.1667,
            Window::Rectangular => 0.25,
        }
    }
}

/// One-sided NPSD of relative count-rate fluctuations δṄ_d/⟨Ṅ_d⟩, 1/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Hz, strictly increasing.
    pub frequencies: Vec<f64>,
    /// 1/Hz. Correlation-derived spectra may dip below zero from noise.
    pub density: Vec<f64>,
    pub one_sided: bool,
    /// ⟨Ṅ_d⟩ used for normalization, s⁻¹.
    pub mean_rate: f64,
    /// Resolution bandwidth, Hz.
    pub rbw: f64,
    pub response: SpectralResponse,
    /// Effective number of independent averages per bin, if known.
    pub averages: Option<f64>,
    /// Bin-to-bin correlation factor for noise propagation.
    pub bin_correlation: f64,
}

impl Spectrum {
    pub fn validate(&self) -> Result<()> {
        ensure(self.frequencies.len() == self.density.len(), || {
            "spectrum grid and density lengths differ".into()
        })?;
        ensure(self.frequencies.len() >= 2, || "spectrum needs at least two bins".into())?;
        ensure(self.frequencies.windows(2).all(|w| w[1] > w[0]), || {
            "spectrum frequency grid must be strictly increasing".into()
        })?;
        ensure(self.density.iter().all(|d| d.is_finite()), || "spectrum density must be finite".into())
    }

    /// Grid spacing, Hz.
    pub fn df(&self) -> f64 {
        self.frequencies[1] - self.frequencies[0]
    }

    /// Shot-noise level 2/⟨Ṅ_d⟩.
    pub fn shot_noise(&self) -> f64 {
        2.0 / self.mean_rate
    }

    /// Index of the bin nearest to `f`.
    pub fn index_of(&self, f: f64) -> usize {
        let i = self.frequencies.partition_point(|&x| x < f);
        if i == 0 {
            0
        } else if i >= self.frequencies.len() {
            self.frequencies.len() - 1
        } else if f - self.frequencies[i - 1] <= self.frequencies[i] - f {
            i - 1
        } else {
            i
        }
    }

    /// Trapezoid-free bin sum ∫S df over the whole grid.
    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.df()
    }

    pub fn write_csv<W: Write>(&self, header: &[String], mut w: W) -> Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "# mean_rate_per_s={}", self.mean_rate)?;
        writeln!(w, "# rbw_Hz={}", self.rbw)?;
        writeln!(w, "frequency_Hz,npsd_per_Hz")?;
        for (f, s) in self.frequencies.iter().zip(&self.density) {
            writeln!(w, "{f:.9e},{s:.9e}")?;
        }
        Ok(())
    }
}

/// Random access to a uniformly binned count sequence.
pub trait BinnedCounts: Sync {
    fn n_bins(&self) -> usize;
    /// Bin width, s.
    fn bin_width(&self) -> f64;
    fn total(&self) -> u64;
    /// Writes counts of bins `start..start + out.len()` into `out`.
    fn fill(&self, start: usize, out: &mut [f64]);
}

impl BinnedCounts for TimeTrace {
    fn n_bins(&self) -> usize {
        self.counts.len()
    }

    fn bin_width(&self) -> f64 {
        self.bin_width
    }

    fn total(&self) -> u64 {
        TimeTrace::total(self)
    }

    fn fill(&self, start: usize, out: &mut [f64]) {
        for (o, &c) in out.iter_mut().zip(&self.counts[start..]) {
            *o = c as f64;
        }
    }
}

/// Bins a tag record lazily, one segment at a time.
pub struct TagBins<'a> {
    times: Cow<'a, [u64]>,
    bin_ps: f64,
    n: usize,
}

impl<'a> TagBins<'a> {
    /// All channels, or only `channel`. Events in a trailing partial bin are dropped.
    pub fn new(tags: &'a PhotonTags, bin_width: f64, channel: Option<u8>) -> Result<Self> {
        ensure(bin_width > 0.0, || "bin width must be positive".into())?;
        let bin_ps = bin_width / PS;
        let n = (tags.duration_ps as f64 / bin_ps).floor() as usize;
        ensure(n > 0, || "bin width exceeds the record duration".into())?;
        let mut times = match channel {
            Some(c) => Cow::Owned(tags.channel(c)),
            None => Cow::Borrowed(&tags.times_ps[..]),
        };
        let end = times.partition_point(|&t| ((t as f64 / bin_ps) as usize) < n);
        if end < times.len() {
            times = Cow::Owned(times[..end].to_vec());
        }
        Ok(TagBins { times, bin_ps, n })
    }
}

impl BinnedCounts for TagBins<'_> {
    fn n_bins(&self) -> usize {
        self.n
    }

    fn bin_width(&self) -> f64 {
        self.bin_ps * PS
    }

    fn total(&self) -> u64 {
        self.times.len() as u64
    }

    fn fill(&self, start: usize, out: &mut [f64]) {
        out.fill(0.0);
        let t0 = start as f64 * self.bin_ps;
        let lo = self.times.partition_point(|&t| (t as f64) < t0);
        for &t in &self.times[lo..] {
            let i = (t as f64 / self.bin_ps) as usize;
            if i < start {
                continue;
            }
            let k = i - start;
            if k >= out.len() {
                break;
            }
            out[k] += 1.0;
        }
    }
}

/// Welch estimate (50 % overlap, per-segment mean removed) of the one-sided
/// NPSD of c_i/⟨c⟩ − 1.
pub fn welch<B: BinnedCounts + ?Sized>(source: &B, segment_len: usize, window: Window) -> Result<Spectrum> {
    let n = source.n_bins();
    ensure(n > 0, || "trace is empty".into())?;
    ensure(segment_len >= 4, || "segment length must be at least 4 bins".into())?;
    let step = segment_len / 2;
    if n < segment_len + step {
        return invalid(format!(
            "trace of {n} bins is shorter than two overlapping segments of {segment_len}"
        ));
    }
    let total = source.total();
    ensure(total > 0, || "trace has no counts (non-positive mean rate)".into())?;
    let dt = source.bin_width();
    let mean = total as f64 / n as f64;
    let k_segments = (n - segment_len) / step + 1;
    let w = window.coefficients(segment_len);
    let w2: f64 = w.iter().map(|v| v * v).sum();
    let n_freq = segment_len / 2 + 1;

    // Fixed-size blocks summed in order keep the result independent of the
    // thread count.
    const BLOCK: usize = 32;
    let n_blocks = k_segments.div_ceil(BLOCK);
    let partial: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut planner = RealFftPlanner::<f64>::new();
            let fft = planner.plan_fft_forward(segment_len);
            let mut buf = vec![0.0; segment_len];
            let mut spec = fft.make_output_vec();
            let mut scratch = fft.make_scratch_vec();
            let mut acc = vec![0.0; n_freq];
            for s in b * BLOCK..((b + 1) * BLOCK).min(k_segments) {
                source.fill(s * step, &mut buf);
                let seg_mean = buf.iter().sum::<f64>() / segment_len as f64;
                for (x, wi) in buf.iter_mut().zip(&w) {
                    *x = (*x - seg_mean) / mean * wi;
                }
                fft.process_with_scratch(&mut buf, &mut spec, &mut scratch)
                    .expect("fft buffer sizes match");
                for (a, c) in acc.iter_mut().zip(&spec) {
                    *a += c.norm_sqr();
                }
            }
            acc
        })
        .collect();
    let mut density = vec![0.0; n_freq];
    for p in &partial {
        for (d, v) in density.iter_mut().zip(p) {
            *d += v;
        }
    }
    let scale = dt / (w2 * k_segments as f64);
    for (k, d) in density.iter_mut().enumerate() {
        let one_sided = if k == 0 || (segment_len % 2 == 0 && k == n_freq - 1) { 1.0 } else { 2.0 };
        *d *= scale * one_sided;
    }
    let df = 1.0 / (segment_len as f64 * dt);
    let c = window.overlap_correlation();
    let averages = if k_segments > 1 {
        k_segments as f64 / (1.0 + 2.0 * c * c)
    } else {
        1.0
    };
    Ok(Spectrum {
        frequencies: (0..n_freq).map(|k| k as f64 * df).collect(),
        density,
        one_sided: true,
        mean_rate: total as f64 / (n as f64 * dt),
        rbw: window.enbw() * df,
        response: SpectralResponse::CountBinning { bin_width: dt },
        averages: Some(averages),
        bin_correlation: window.bin_correlation(),
    })
}

/// NPSD of a binned count trace.
pub fn trace_npsd(trace: &TimeTrace, segment_len: usize, window: Window) -> Result<Spectrum> {
    welch(trace, segment_len, window)
}

/// NPSD of a tag record binned on the fly; avoids materializing the full trace.
pub fn tags_npsd(
    tags: &PhotonTags,
    bin_width: f64,
    segment_len: usize,
    window: Window,
    channel: Option<u8>,
) -> Result<Spectrum> {
    ensure(!tags.is_empty(), || "photon record is empty".into())?;
    let bins = TagBins::new(tags, bin_width, channel)?;
    welch(&bins, segment_len, window)
}

/// Largest power-of-two segment giving at least `min_segments` Welch segments.
pub fn default_segment_len(n_bins: usize, min_segments: usize) -> usize {
    let mut l = 1usize << 20;
    while l > 16 && (n_bins < l || (n_bins - l) / (l / 2) + 1 < min_segments) {
        l /= 2;
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_gains() {
        assert_eq!(SpectralResponse::Flat.gain(1e6), 1.0);
        let r = SpectralResponse::CountBinning { bin_width: 1e-6 };
        assert!((r.gain(5e5) - (2.0 / PI).powi(2)).abs() < 1e-12);
        assert!(r.gain(1e6).abs() < 1e-20);
    }

    #[test]
    fn tag_bins_agree_with_time_trace() {
        let mut t = PhotonTags::empty(2, 1_000_000, [0; 32]);
        for (i, ps) in [5u64, 1_000, 1_001, 250_000, 999_999].iter().enumerate() {
            t.push(*ps, (i % 2) as u8);
        }
        let tr = TimeTrace::from_tags(&t, 1e-7, None).unwrap();
        let tb = TagBins::new(&t, 1e-7, None).unwrap();
        let mut a = vec![0.0; 10];
        tb.fill(0, &mut a);
        let b: Vec<f64> = tr.counts.iter().map(|&c| c as f64).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn too_short_trace_rejected() {
        let tr = TimeTrace {
            bin_width: 1e-6,
            counts: vec![1; 100],
        };
        assert!(trace_npsd(&tr, 80, Window::Hann).is_err());
        assert!(trace_npsd(&tr, 64, Window::Hann).is_ok());
    }
}
