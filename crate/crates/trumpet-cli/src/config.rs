//! Run configurations. Physical quantities carry their unit in the key name;
//! everything is converted to rad/s and SI once, here.
#![allow(non_snake_case)]

use crate::error::{CliError, CliResult};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use trumpet_core::analysis::{GridSpec, Window};
use trumpet_core::emitter::{DriveCondition, Emitter, LineshapeParams};
use trumpet_core::mechanics::{coupling_from_strain, DeformationPotentials, MechMode, ModeCatalog, QDPosition};
use trumpet_core::noisebudget::{DetuningPolicy, LineshapeModel, ReadoutConfig, SweepVariable};
use trumpet_core::presets;
use trumpet_core::simulator::{BlinkingModel, DetectorModel, ModeCoupling, SimConfig};
use trumpet_core::units::{hz, to_hz};

/// A parsed configuration file and its source text.
pub struct Loaded<T> {
    pub value: T,
    pub path: PathBuf,
    text: String,
}

impl<T: DeserializeOwned> Loaded<T> {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: cannot read config: {e}", path.display())))?;
        let value = serde_json::from_str(&text).map_err(|e| {
            CliError::Validation(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
        })?;
        Ok(Loaded {
            value,
            path: path.to_path_buf(),
            text,
        })
    }
}

impl<T> Loaded<T> {
    /// Wraps a value built in code; errors are anchored to the key name only.
    pub fn inline(value: T, name: &str) -> Self {
        Loaded {
            value,
            path: PathBuf::from(name),
            text: String::new(),
        }
    }

    /// Error message pointing at the first line that mentions `key`.
    pub fn error(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        let needle = format!("\"{key}\"");
        match self.text.lines().position(|l| l.contains(&needle)) {
            Some(i) => CliError::Validation(format!("{}:{}: {key}: {msg}", self.path.display(), i + 1)),
            None => CliError::Validation(format!("{}: {key}: {msg}", self.path.display())),
        }
    }

    pub fn check(&self, ok: bool, key: &str, msg: impl std::fmt::Display) -> CliResult<()> {
        if ok {
            Ok(())
        } else {
            Err(self.error(key, msg))
        }
    }

    /// Resolves a path relative to the configuration file and checks it exists.
    pub fn file(&self, key: &str, p: &Path) -> CliResult<PathBuf> {
        let full = if p.is_absolute() || self.text.is_empty() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        };
        if full.is_file() {
            Ok(full)
        } else {
            Err(self.error(key, format!("file {} does not exist", full.display())))
        }
    }
}

pub fn load_catalog(path: Option<&Path>) -> CliResult<ModeCatalog> {
    match path {
        None => Ok(ModeCatalog::default_device()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Validation(format!("{}: cannot read catalog: {e}", p.display())))?;
            ModeCatalog::from_json(&text).map_err(|e| CliError::from(e).context(p.display()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmitterSpec {
    pub gamma_sp_per_s: f64,
    pub gamma_star_per_s: f64,
    /// Standard deviation of the Gaussian (inhomogeneous) broadening.
    pub sigma_inh_over_2pi_Hz: f64,
}

impl Default for EmitterSpec {
    fn default() -> Self {
        let e = presets::device_emitter();
        EmitterSpec {
            gamma_sp_per_s: e.gamma_sp,
            gamma_star_per_s: e.gamma_star,
            sigma_inh_over_2pi_Hz: to_hz(e.sigma_inh),
        }
    }
}

impl EmitterSpec {
    pub fn ideal(gamma_sp: f64) -> Self {
        EmitterSpec {
            gamma_sp_per_s: gamma_sp,
            gamma_star_per_s: 0.0,
            sigma_inh_over_2pi_Hz: 0.0,
        }
    }

    pub fn build(&self) -> CliResult<Emitter> {
        Ok(Emitter::new(self.gamma_sp_per_s, self.gamma_star_per_s, hz(self.sigma_inh_over_2pi_Hz))?)
    }
}

/// Laser drive. The detuning is given either in Hz or in units of the line
/// half width at this drive; with neither, Δ equals one half width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    pub rabi_per_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_over_2pi_Hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_half_widths: Option<f64>,
}

impl Default for DriveSpec {
    fn default() -> Self {
        DriveSpec {
            rabi_per_s: presets::GAMMA_SP,
            detuning_over_2pi_Hz: None,
            detuning_half_widths: Some(1.0),
        }
    }
}

impl DriveSpec {
    /// `hwhm` maps a Rabi frequency to the relevant line half width.
    pub fn build<T>(&self, cfg: &Loaded<T>, hwhm: impl Fn(f64) -> f64) -> CliResult<DriveCondition> {
        cfg.check(self.rabi_per_s >= 0.0 && self.rabi_per_s.is_finite(), "rabi_per_s", "must be non-negative")?;
        let detuning = match (self.detuning_over_2pi_Hz, self.detuning_half_widths) {
            (Some(_), Some(_)) => {
                return Err(cfg.error("detuning_half_widths", "give only one of detuning_over_2pi_Hz and detuning_half_widths"))
            }
            (Some(d), None) => hz(d),
            (None, Some(k)) => k * hwhm(self.rabi_per_s),
            (None, None) => hwhm(self.rabi_per_s),
        };
        cfg.check(detuning.is_finite(), "drive", "detuning is not finite")?;
        Ok(DriveCondition {
            omega_r: self.rabi_per_s,
            detuning,
        })
    }
}

/// A catalog mode (by label, with optional overrides) or a free-standing mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_over_2pi_Hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_m_over_2pi_Hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_eff_kg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_over_2pi_Hz: Option<f64>,
}

impl ModeSpec {
    pub fn catalog(label: &str) -> Self {
        ModeSpec {
            label: label.into(),
            freq_over_2pi_Hz: None,
            gamma_m_over_2pi_Hz: None,
            m_eff_kg: None,
            lambda_over_2pi_Hz: None,
        }
    }

    pub fn free(label: &str, freq_hz: f64, gamma_hz: f64, m_eff: f64, lambda_hz: f64) -> Self {
        ModeSpec {
            label: label.into(),
            freq_over_2pi_Hz: Some(freq_hz),
            gamma_m_over_2pi_Hz: Some(gamma_hz),
            m_eff_kg: Some(m_eff),
            lambda_over_2pi_Hz: Some(lambda_hz),
        }
    }

    pub fn build_mode<T>(&self, cfg: &Loaded<T>, cat: &ModeCatalog) -> CliResult<MechMode> {
        let mut mode = match cat.get(&self.label) {
            Some(m) => m.clone(),
            None => {
                let (Some(f), Some(g), Some(m)) = (self.freq_over_2pi_Hz, self.gamma_m_over_2pi_Hz, self.m_eff_kg) else {
                    return Err(cfg.error(
                        "label",
                        format!(
                            "mode {} is not in the catalog; give freq_over_2pi_Hz, gamma_m_over_2pi_Hz and m_eff_kg",
                            self.label
                        ),
                    ));
                };
                MechMode::simple(&self.label, hz(f), hz(g), m).map_err(|e| cfg.error("label", e))?
            }
        };
        if let Some(f) = self.freq_over_2pi_Hz {
            mode.omega_m = hz(f);
        }
        if let Some(g) = self.gamma_m_over_2pi_Hz {
            mode.gamma_m = hz(g);
        }
        if let Some(m) = self.m_eff_kg {
            mode.m_eff = m;
        }
        mode.validate().map_err(|e| cfg.error("modes", e))?;
        Ok(mode)
    }

    /// Coupling: explicit, else the catalog value, else from strain at `pos`.
    pub fn build_lambda<T>(
        &self,
        cfg: &Loaded<T>,
        cat: &ModeCatalog,
        mode: &MechMode,
        pos: Option<&PositionSpec>,
        temperature: f64,
    ) -> CliResult<f64> {
        if let Some(l) = self.lambda_over_2pi_Hz {
            cfg.check(l >= 0.0 && l.is_finite(), "lambda_over_2pi_Hz", "must be non-negative")?;
            return Ok(hz(l));
        }
        if let Some(l) = cat.coupling(&self.label) {
            return Ok(l);
        }
        match pos {
            Some(p) => {
                let pos = p.build(cfg)?;
                Ok(coupling_from_strain(mode, &pos, &DeformationPotentials::default(), temperature)
                    .map_err(|e| cfg.error("qd_position", e))?)
            }
            None => Err(cfg.error(
                "modes",
                format!(
                    "mode {} has no coupling; give lambda_over_2pi_Hz or a qd_position",
                    self.label
                ),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionSpec {
    pub r_nm: f64,
    pub phi_deg: f64,
}

impl PositionSpec {
    pub fn build<T>(&self, cfg: &Loaded<T>) -> CliResult<QDPosition> {
        QDPosition::canonical(self.r_nm * 1e-9, self.phi_deg.to_radians()).map_err(|e| cfg.error("qd_position", e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlinkingSpec {
    pub on_fraction: f64,
    pub correlation_time_s: f64,
}

impl Default for BlinkingSpec {
    fn default() -> Self {
        BlinkingSpec {
            on_fraction: presets::ON_FRACTION,
            correlation_time_s: 100e-9,
        }
    }
}

impl BlinkingSpec {
    pub fn none() -> Self {
        BlinkingSpec {
            on_fraction: 1.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSpec {
    pub jitter_sigma_s: f64,
    pub dead_time_s: f64,
    pub channels: u8,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        let d = DetectorModel::default();
        DetectorSpec {
            jitter_sigma_s: d.jitter_sigma,
            dead_time_s: d.dead_time,
            channels: d.channels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanicsMode {
    /// Event-driven exact propagation; no trajectory output.
    #[default]
    Exact,
    /// Trajectories sampled every `dt_s` and interpolated.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TagFormat {
    #[default]
    Binary,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfScanSpec {
    pub from_over_2pi_Hz: f64,
    pub to_over_2pi_Hz: f64,
    pub points: usize,
    pub dwell_s: f64,
}

impl RfScanSpec {
    pub fn grid<T>(&self, cfg: &Loaded<T>) -> CliResult<Vec<f64>> {
        cfg.check(self.points >= 5, "points", "an RF scan needs at least 5 points")?;
        cfg.check(self.to_over_2pi_Hz > self.from_over_2pi_Hz, "to_over_2pi_Hz", "must exceed from_over_2pi_Hz")?;
        cfg.check(self.dwell_s > 0.0, "dwell_s", "must be positive")?;
        let step = (self.to_over_2pi_Hz - self.from_over_2pi_Hz) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| hz(self.from_over_2pi_Hz + step * i as f64)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    pub modes: Vec<ModeSpec>,
    /// Position used to derive couplings missing from the catalog.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qd_position: Option<PositionSpec>,
    #[serde(default)]
    pub emitter: EmitterSpec,
    #[serde(default)]
    pub drive: DriveSpec,
    #[serde(default = "default_efficiency")]
    pub efficiency: f64,
    #[serde(default = "default_temperature")]
    pub temperature_K: f64,
    #[serde(default)]
    pub blinking: BlinkingSpec,
    #[serde(default)]
    pub detector: DetectorSpec,
    #[serde(default)]
    pub mechanics: MechanicsMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    /// Also write a binned count trace with this bin width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_bin_s: Option<f64>,
    /// Write sampled displacements (requires `mechanics: sampled`).
    #[serde(default)]
    pub write_displacement: bool,
    #[serde(default)]
    pub tag_format: TagFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rf_scan: Option<RfScanSpec>,
}

fn default_seed() -> u64 {
    1
}

fn default_efficiency() -> f64 {
    presets::EFFICIENCY
}

fn default_temperature() -> f64 {
    presets::TEMPERATURE
}

/// Largest trace the simulate command will write.
pub const MAX_TRACE_BINS: f64 = 5e7;

impl SimulateConfig {
    pub fn device(labels: &[&str], duration: f64, seed: u64) -> Self {
        SimulateConfig {
            seed,
            duration_s: duration,
            catalog: None,
            modes: labels.iter().map(|l| ModeSpec::catalog(l)).collect(),
            qd_position: None,
            emitter: EmitterSpec::default(),
            drive: DriveSpec::default(),
            efficiency: presets::EFFICIENCY,
            temperature_K: presets::TEMPERATURE,
            blinking: BlinkingSpec::default(),
            detector: DetectorSpec::default(),
            mechanics: MechanicsMode::Exact,
            dt_s: None,
            trace_bin_s: None,
            write_displacement: false,
            tag_format: TagFormat::Binary,
            rf_scan: None,
        }
    }
}

impl Loaded<SimulateConfig> {
    pub fn build(&self) -> CliResult<SimConfig> {
        let c = &self.value;
        self.check(c.duration_s > 0.0 && c.duration_s.is_finite(), "duration_s", "must be positive")?;
        self.check(c.efficiency > 0.0 && c.efficiency <= 1.0, "efficiency", "must lie in (0, 1]")?;
        self.check(c.temperature_K >= 0.0, "temperature_K", "must be non-negative")?;
        self.check(
            c.blinking.on_fraction > 0.0 && c.blinking.on_fraction <= 1.0,
            "on_fraction",
            "must lie in (0, 1]",
        )?;
        self.check(c.blinking.correlation_time_s > 0.0, "correlation_time_s", "must be positive")?;
        self.check(c.detector.channels == 1 || c.detector.channels == 2, "channels", "must be 1 or 2")?;
        self.check(c.detector.jitter_sigma_s >= 0.0, "jitter_sigma_s", "must be non-negative")?;
        self.check(c.detector.dead_time_s >= 0.0, "dead_time_s", "must be non-negative")?;
        self.check(
            !c.write_displacement || c.mechanics == MechanicsMode::Sampled,
            "write_displacement",
            "needs \"mechanics\": \"sampled\"",
        )?;
        if let Some(b) = c.trace_bin_s {
            self.check(b > 0.0, "trace_bin_s", "must be positive")?;
            self.check(c.duration_s / b <= MAX_TRACE_BINS, "trace_bin_s", "trace would exceed 5e7 bins")?;
        }
        let catalog_path = match &c.catalog {
            Some(p) => Some(self.file("catalog", p)?),
            None => None,
        };
        let cat = load_catalog(catalog_path.as_deref())?;
        let emitter = c.emitter.build().map_err(|e| e.context(self.path.display()))?;
        let drive = c
            .drive
            .build(self, |om| trumpet_core::emitter::voigt_hwhm(&emitter, om))?;
        let mut modes = Vec::with_capacity(c.modes.len());
        for m in &c.modes {
            let mode = m.build_mode(self, &cat)?;
            let lambda = m.build_lambda(self, &cat, &mode, c.qd_position.as_ref(), c.temperature_K)?;
            modes.push(ModeCoupling { mode, lambda });
        }
        let dt = match c.dt_s {
            Some(dt) => {
                self.check(dt > 0.0, "dt_s", "must be positive")?;
                dt
            }
            None => SimConfig::max_dt(&modes),
        };
        let sim = SimConfig {
            modes,
            emitter,
            drive,
            efficiency: c.efficiency,
            temperature: c.temperature_K,
            blinking: BlinkingModel {
                on_fraction: c.blinking.on_fraction,
                correlation_time: c.blinking.correlation_time_s,
            },
            detector: DetectorModel {
                jitter_sigma: c.detector.jitter_sigma_s,
                dead_time: c.detector.dead_time_s,
                channels: c.detector.channels,
            },
            duration: c.duration_s,
            dt,
            seed: c.seed,
        };
        sim.validate().map_err(|e| CliError::from(e).context(self.path.display()))?;
        Ok(sim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    #[default]
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn build(self) -> Window {
        match self {
            WindowKind::Hann => Window::Hann,
            WindowKind::Rectangular => Window::Rectangular,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub center_Hz: f64,
    pub half_width_Hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct G2Spec {
    pub bin_s: f64,
    pub tau_max_s: f64,
    pub tau_min_s: f64,
    pub pad: usize,
}

impl Default for G2Spec {
    fn default() -> Self {
        G2Spec {
            bin_s: 1e-9,
            tau_max_s: 30e-6,
            tau_min_s: trumpet_core::analysis::DEFAULT_TAU_MIN,
            pad: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineshapeSpec {
    pub lorentzian_fwhm_over_2pi_Hz: f64,
    pub gaussian_fwhm_over_2pi_Hz: f64,
    #[serde(default)]
    pub center_over_2pi_Hz: f64,
}

impl LineshapeSpec {
    pub fn build(&self) -> CliResult<LineshapeParams> {
        Ok(LineshapeParams::new(
            hz(self.lorentzian_fwhm_over_2pi_Hz),
            hz(self.gaussian_fwhm_over_2pi_Hz),
            1.0,
            hz(self.center_over_2pi_Hz),
        )?)
    }

    /// Fluorescence line of the device emitter at Ω_R = γ_sp.
    pub fn device() -> Self {
        let p = LineshapeParams::from_emitter(&presets::device_emitter(), presets::GAMMA_SP);
        LineshapeSpec {
            lorentzian_fwhm_over_2pi_Hz: to_hz(p.lorentzian_fwhm),
            gaussian_fwhm_over_2pi_Hz: to_hz(p.gaussian_fwhm),
            center_over_2pi_Hz: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordSpec {
    pub input: PathBuf,
    pub detuning_over_2pi_Hz: f64,
}

/// Peak areas of one mode at several detunings, fitted for λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub mode: String,
    #[serde(default = "default_temperature")]
    pub temperature_K: f64,
    #[serde(default = "default_half_width")]
    pub half_width_Hz: f64,
    pub records: Vec<RecordSpec>,
}

fn default_half_width() -> f64 {
    5e3
}

/// Displacement sensitivity of the primary input's floor near a mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivitySpec {
    pub mode: String,
    pub lambda_over_2pi_Hz: f64,
    pub detuning_over_2pi_Hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    #[serde(default = "default_bin")]
    pub bin_s: f64,
    /// Welch segment length in bins; chosen automatically when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_bins: Option<usize>,
    #[serde(default)]
    pub window: WindowKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<u8>,
    /// Explicit integration windows; peaks are detected when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub windows: Vec<WindowSpec>,
    #[serde(default = "default_threshold")]
    pub threshold_sigma: f64,
    #[serde(default = "default_f_min")]
    pub f_min_Hz: f64,
    #[serde(default = "default_tolerance")]
    pub match_tolerance: f64,
    /// Peaks below this significance are reported but not assigned or used.
    #[serde(default = "default_significance")]
    pub min_significance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    #[serde(default)]
    pub g2: G2Spec,
    #[serde(default = "default_true")]
    pub localize: bool,
    #[serde(default = "default_reference")]
    pub reference: String,
    /// CSV written by `simulate` (rf_scan.csv); fitted for the lineshape.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rf_scan: Option<PathBuf>,
    /// Lineshape used when no RF scan is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lineshape: Option<LineshapeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivitySpec>,
}

fn default_bin() -> f64 {
    0.5e-6
}

fn default_threshold() -> f64 {
    5.0
}

fn default_f_min() -> f64 {
    200e3
}

fn default_tolerance() -> f64 {
    trumpet_core::analysis::DEFAULT_MATCH_TOLERANCE
}

fn default_significance() -> f64 {
    3.0
}

fn default_true() -> bool {
    true
}

fn default_reference() -> String {
    "B2".into()
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all analysis fields have defaults")
    }
}

impl Loaded<AnalyzeConfig> {
    pub fn validate(&self) -> CliResult<()> {
        let c = &self.value;
        self.check(c.bin_s > 0.0, "bin_s", "must be positive")?;
        if let Some(s) = c.segment_bins {
            self.check(s >= 16 && s.is_power_of_two(), "segment_bins", "must be a power of two ≥ 16")?;
        }
        for w in &c.windows {
            self.check(w.half_width_Hz > 0.0 && w.center_Hz > w.half_width_Hz, "windows", "need 0 < half_width_Hz < center_Hz")?;
        }
        self.check(c.threshold_sigma > 0.0, "threshold_sigma", "must be positive")?;
        self.check(c.f_min_Hz >= 0.0, "f_min_Hz", "must be non-negative")?;
        self.check(c.match_tolerance >= 0.0, "match_tolerance", "must be non-negative")?;
        let g = &c.g2;
        self.check(g.bin_s > 0.0, "g2", "bin_s must be positive")?;
        self.check(g.tau_max_s > g.tau_min_s && g.tau_min_s >= 0.0, "g2", "need 0 ≤ tau_min_s < tau_max_s")?;
        self.check(g.pad >= 1, "pad", "must be at least 1")?;
        if let Some(cp) = &c.coupling {
            self.check(cp.records.len() >= 3, "records", "a coupling fit needs at least 3 records")?;
            self.check(cp.half_width_Hz > 0.0, "half_width_Hz", "must be positive")?;
            self.check(cp.temperature_K > 0.0, "temperature_K", "must be positive")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

/// Sweep grid. Bounds carry their unit in the key: `*_per_s` or `*_gamma_sp`
/// for the Rabi frequency, `*_over_2pi_Hz` for detuning and coupling, and
/// plain `from`/`to` for the efficiency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_per_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_per_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_gamma_sp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_gamma_sp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_over_2pi_Hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_over_2pi_Hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<f64>,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
    #[serde(default)]
    pub detuning_policy: DetuningPolicy,
}

impl SweepSpec {
    pub fn rabi_in_gamma_sp(from: f64, to: f64, points: usize, policy: DetuningPolicy) -> Self {
        SweepSpec {
            variable: SweepVariable::RabiFrequency,
            from_per_s: None,
            to_per_s: None,
            from_gamma_sp: Some(from),
            to_gamma_sp: Some(to),
            from_over_2pi_Hz: None,
            to_over_2pi_Hz: None,
            from: None,
            to: None,
            points,
            spacing: Spacing::Log,
            detuning_policy: policy,
        }
    }

    /// Grid in internal units (rad/s or dimensionless).
    pub fn grid<T>(&self, cfg: &Loaded<T>, gamma_sp: f64) -> CliResult<Vec<f64>> {
        let pairs = [
            (self.from_per_s, self.to_per_s, 1.0, "from_per_s"),
            (self.from_gamma_sp, self.to_gamma_sp, gamma_sp, "from_gamma_sp"),
            (self.from_over_2pi_Hz, self.to_over_2pi_Hz, hz(1.0), "from_over_2pi_Hz"),
            (self.from, self.to, 1.0, "from"),
        ];
        let given: Vec<_> = pairs.iter().filter(|p| p.0.is_some() || p.1.is_some()).collect();
        if given.len() != 1 {
            return Err(cfg.error("sweep", "give exactly one pair of sweep bounds"));
        }
        let (a, b, scale, key) = *given[0];
        let allowed: &[&str] = match self.variable {
            SweepVariable::RabiFrequency => &["from_per_s", "from_gamma_sp"],
            SweepVariable::Detuning | SweepVariable::Coupling => &["from_over_2pi_Hz"],
            SweepVariable::Efficiency => &["from"],
        };
        if !allowed.contains(&key) {
            return Err(cfg.error(key, format!("bounds in these units do not fit a {:?} sweep", self.variable)));
        }
        let (Some(a), Some(b)) = (a, b) else {
            return Err(cfg.error(key, "both bounds are required"));
        };
        cfg.check(self.points >= 1, "points", "must be at least 1")?;
        cfg.check(a.is_finite() && b.is_finite(), key, "bounds must be finite")?;
        cfg.check(self.points == 1 || a != b, key, "bounds coincide")?;
        let grid = match self.spacing {
            Spacing::Log => {
                cfg.check(a > 0.0 && b > 0.0, key, "log spacing needs positive bounds")?;
                trumpet_core::noisebudget::log_grid(a, b, self.points)
            }
            Spacing::Linear => {
                if self.points == 1 {
                    vec![a]
                } else {
                    let step = (b - a) / (self.points - 1) as f64;
                    (0..self.points).map(|i| a + step * i as f64).collect()
                }
            }
        };
        Ok(grid.into_iter().map(|v| v * scale).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencySweepSpec {
    pub from_over_2pi_Hz: f64,
    pub to_over_2pi_Hz: f64,
    pub points: usize,
    /// Evaluate at the drive that minimizes the added noise.
    #[serde(default)]
    pub at_sql_drive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSpec {
    #[serde(default)]
    pub emitter: EmitterSpec,
    #[serde(default)]
    pub drive: DriveSpec,
    pub mode: ModeSpec,
    /// λ in units of √(γ_sp·γ_m); overrides the mode's coupling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_sqrt_gamma_sp_gamma_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qd_position: Option<PositionSpec>,
    #[serde(default = "default_efficiency")]
    pub efficiency: f64,
    #[serde(default = "default_temperature")]
    pub temperature_K: f64,
    #[serde(default = "default_lineshape")]
    pub lineshape: LineshapeModel,
}

fn default_lineshape() -> LineshapeModel {
    LineshapeModel::Inhomogeneous
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    pub readout: ReadoutSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_sweep: Option<FrequencySweepSpec>,
}

impl BudgetConfig {
    /// Device read-out of one catalog mode at Δ = Γ_inh.
    pub fn device(label: &str) -> Self {
        BudgetConfig {
            catalog: None,
            readout: ReadoutSpec {
                emitter: EmitterSpec::default(),
                drive: DriveSpec::default(),
                mode: ModeSpec::catalog(label),
                lambda_sqrt_gamma_sp_gamma_m: None,
                qd_position: None,
                efficiency: presets::EFFICIENCY,
                temperature_K: presets::TEMPERATURE,
                lineshape: LineshapeModel::Inhomogeneous,
            },
            sweep: None,
            frequency_sweep: None,
        }
    }

    /// Idealized probe: γ_sp = 1e9 s⁻¹, γ* = 0, ε = 1, T = 0, F1 with
    /// γ_m/2π = 300 Hz, λ/2π = 280 kHz, Δ = Γ.
    pub fn ideal() -> Self {
        BudgetConfig {
            catalog: None,
            readout: ReadoutSpec {
                emitter: EmitterSpec::ideal(1e9),
                drive: DriveSpec {
                    rabi_per_s: 1e9,
                    detuning_over_2pi_Hz: None,
                    detuning_half_widths: Some(1.0),
                },
                mode: ModeSpec::free("F1x", 607.9e3, 300.0, 2.6e-14, 280e3),
                lambda_sqrt_gamma_sp_gamma_m: None,
                qd_position: None,
                efficiency: 1.0,
                temperature_K: 0.0,
                lineshape: LineshapeModel::Homogeneous,
            },
            sweep: None,
            frequency_sweep: None,
        }
    }
}

impl Loaded<BudgetConfig> {
    pub fn build(&self) -> CliResult<ReadoutConfig> {
        let r = &self.value.readout;
        self.check(r.efficiency > 0.0 && r.efficiency <= 1.0, "efficiency", "must lie in (0, 1]")?;
        self.check(r.temperature_K >= 0.0, "temperature_K", "must be non-negative")?;
        let catalog_path = match &self.value.catalog {
            Some(p) => Some(self.file("catalog", p)?),
            None => None,
        };
        let cat = load_catalog(catalog_path.as_deref())?;
        let emitter = r.emitter.build().map_err(|e| e.context(self.path.display()))?;
        let mode = r.mode.build_mode(self, &cat)?;
        let lambda = match r.lambda_sqrt_gamma_sp_gamma_m {
            Some(k) => {
                self.check(k >= 0.0, "lambda_sqrt_gamma_sp_gamma_m", "must be non-negative")?;
                k * (emitter.gamma_sp * mode.gamma_m).sqrt()
            }
            None => r
                .mode
                .build_lambda(self, &cat, &mode, r.qd_position.as_ref(), r.temperature_K)?,
        };
        let mut cfg = ReadoutConfig {
            emitter,
            drive: DriveCondition {
                omega_r: r.drive.rabi_per_s,
                detuning: 0.0,
            },
            mode,
            lambda,
            efficiency: r.efficiency,
            temperature: r.temperature_K,
            lineshape: r.lineshape,
        };
        let probe = cfg.clone();
        cfg.drive = r.drive.build(self, |om| probe.at_drive(om).hwhm())?;
        cfg.validate().map_err(|e| CliError::from(e).context(self.path.display()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridSpec,
}

pub fn to_json_pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("configuration serializes")
}
