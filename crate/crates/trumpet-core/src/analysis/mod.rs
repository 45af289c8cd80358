//! Measurement pipeline: spectra from traces and correlations, peak areas,
//! coupling extraction, lineshape fits, mode assignment and localization.
//!
//! Measured spectra are one-sided; the noise budget is double-sided. The
//! factor of two is applied only in [`displacement_sensitivity`].

mod correlation;
mod coupling;
mod lineshape;
mod localize;
mod peaks;
mod spectrum;

pub use correlation::{g2_histogram, npsd_from_g2, G2Table};
pub use coupling::{
    displacement_sensitivity, extract_coupling, floor_between, predicted_area, zpf_integration_time, AreaPoint,
    CouplingFit,
};
pub use lineshape::{fit_rf_spectrum, ljung_box, simulate_rf_scan, RfFit, RfPoint};
pub use localize::{
    forward_amplitudes, localize_qd, GridSpec, LocalizationResult, ModeAmplitude, ModeComparison, ResidualMap,
};
pub use peaks::{
    assign_modes, detect_windows, find_peaks_and_areas, ModeAssignment, PeakResult, PeakWindow,
    DEFAULT_MATCH_TOLERANCE,
};
pub use spectrum::{
    default_segment_len, tags_npsd, trace_npsd, welch, BinnedCounts, SpectralResponse, Spectrum, TagBins, Window,
};

/// Start of the correlation window used for spectra, s; excludes antibunching
/// and blinking bunching.
pub const DEFAULT_TAU_MIN: f64 = 0.25e-6;
