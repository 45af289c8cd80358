//! Emitter position from relative mode amplitudes (S̄ ∝ ε_zz²).

use crate::error::{ensure, Error, Result};
use crate::mechanics::{strain_at, ModeCatalog, ModeFamily, QDPosition};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Measured peak amplitude of one catalog mode, any common scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAmplitude {
    pub label: String,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// nm
    pub r_max_nm: f64,
    pub coarse_dr_nm: f64,
    pub coarse_dphi_deg: f64,
    pub fine_dr_nm: f64,
    pub fine_dphi_deg: f64,
    /// Mode whose amplitude defines unity.
    pub reference: String,
    /// σ_k = relative_error·m_k + absolute_error.
    pub relative_error: f64,
    pub absolute_error: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            r_max_nm: 150.0,
            coarse_dr_nm: 5.0,
            coarse_dphi_deg: 5.0,
            fine_dr_nm: 1.0,
            fine_dphi_deg: 1.0,
            reference: "B2".into(),
            relative_error: 0.1,
            absolute_error: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub label: String,
    pub measured: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub position: QDPosition,
    pub r_nm: f64,
    pub phi_deg: f64,
    pub chi2: f64,
    pub comparison: Vec<ModeComparison>,
}

/// χ² on the coarse grid, for residual maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualMap {
    pub r_nm: Vec<f64>,
    pub phi_deg: Vec<f64>,
    /// Row-major over (r, φ).
    pub chi2: Vec<f64>,
}

/// ε_zz² of each labeled mode at `pos`, divided by that of `reference`.
pub fn forward_amplitudes(
    catalog: &ModeCatalog,
    labels: &[&str],
    reference: &str,
    pos: &QDPosition,
) -> Result<Vec<f64>> {
    let get = |l: &str| {
        catalog
            .get(l)
            .ok_or_else(|| Error::Validation(format!("mode {l} is not in the catalog")))
    };
    let ezz2 = |l: &str| -> Result<f64> { Ok(strain_at(get(l)?, pos)?.e_zz.powi(2)) };
    let r = ezz2(reference)?;
    if r == 0.0 {
        return Err(Error::Unresolvable(format!("reference mode {reference} has no strain here")));
    }
    labels.iter().map(|l| Ok(ezz2(l)? / r)).collect()
}

struct Problem<'a> {
    catalog: &'a ModeCatalog,
    labels: Vec<&'a str>,
    measured: Vec<f64>,
    sigma: Vec<f64>,
    reference: &'a str,
}

impl Problem<'_> {
    fn chi2(&self, r_nm: f64, phi_deg: f64) -> f64 {
        let Ok(pos) = QDPosition::degrees(r_nm, phi_deg) else {
            return f64::INFINITY;
        };
        match forward_amplitudes(self.catalog, &self.labels, self.reference, &pos) {
            Ok(p) => p
                .iter()
                .zip(&self.measured)
                .zip(&self.sigma)
                .map(|((p, m), s)| ((p - m) / s).powi(2))
                .sum(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Minimum over a rectangular (r, φ) grid; ties go to the lowest index.
    fn search(&self, rs: &[f64], phis: &[f64]) -> (f64, f64, f64, Vec<f64>) {
        let cells: Vec<f64> = (0..rs.len() * phis.len())
            .into_par_iter()
            .map(|k| self.chi2(rs[k / phis.len()], phis[k % phis.len()]))
            .collect();
        let (best, c) = cells
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bc), (i, &c)| if c < bc { (i, c) } else { (bi, bc) });
        (rs[best / phis.len()], phis[best % phis.len()], c, cells)
    }
}

fn axis(lo: f64, hi: f64, step: f64, start: f64) -> Vec<f64> {
    let n0 = ((lo - start) / step).ceil() as i64;
    let n1 = ((hi - start) / step + 1e-9).floor() as i64;
    (n0..=n1).map(|i| start + i as f64 * step).collect()
}

/// Coarse cells refined on the fine grid.
const REFINE_CANDIDATES: usize = 4;

/// Two-stage grid search in the canonical quadrant.
pub fn localize_qd(
    amplitudes: &[ModeAmplitude],
    catalog: &ModeCatalog,
    grid: &GridSpec,
) -> Result<(LocalizationResult, ResidualMap)> {
    ensure(amplitudes.len() >= 2, || "localization needs at least two mode amplitudes".into())?;
    ensure(
        grid.coarse_dr_nm > 0.0 && grid.coarse_dphi_deg > 0.0 && grid.fine_dr_nm > 0.0 && grid.fine_dphi_deg > 0.0,
        || "grid steps must be positive".into(),
    )?;
    ensure(grid.relative_error >= 0.0 && grid.absolute_error >= 0.0, || "error model must be non-negative".into())?;
    ensure(grid.relative_error > 0.0 || grid.absolute_error > 0.0, || "error model cannot be zero".into())?;
    let r_max = grid.r_max_nm.min(catalog.cross_section_radius * 1e9);
    for a in amplitudes {
        if catalog.get(&a.label).is_none() {
            return Err(Error::Validation(format!("mode {} is not in the catalog", a.label)));
        }
        ensure(a.amplitude >= 0.0 && a.amplitude.is_finite(), || {
            format!("amplitude of {} must be finite and non-negative", a.label)
        })?;
    }
    let Some(reference) = amplitudes.iter().find(|a| a.label == grid.reference) else {
        return Err(Error::Unresolvable(format!(
            "reference mode {} was not measured",
            grid.reference
        )));
    };
    ensure(reference.amplitude > 0.0, || "reference amplitude must be positive".into())?;
    let has_flexural = amplitudes.iter().any(|a| {
        catalog
            .get(&a.label)
            .is_some_and(|m| m.family != ModeFamily::Breathing)
    });
    if !has_flexural {
        return Err(Error::Unresolvable(
            "no flexural mode among the inputs; position-independent strain cannot localize".into(),
        ));
    }
    let others: Vec<&ModeAmplitude> = amplitudes.iter().filter(|a| a.label != grid.reference).collect();
    let measured: Vec<f64> = others.iter().map(|a| a.amplitude / reference.amplitude).collect();
    let problem = Problem {
        catalog,
        labels: others.iter().map(|a| a.label.as_str()).collect(),
        sigma: measured
            .iter()
            .map(|m| grid.relative_error * m + grid.absolute_error)
            .map(|s| if s > 0.0 { s } else { f64::MIN_POSITIVE })
            .collect(),
        measured,
        reference: &grid.reference,
    };
    let rs = axis(0.0, r_max, grid.coarse_dr_nm, 0.0);
    let phis = axis(0.0, 90.0, grid.coarse_dphi_deg, 0.0);
    let (_, _, _, cells) = problem.search(&rs, &phis);
    // Refine around the few best coarse cells; a flat landscape at small r
    // can put the single best cell outside the true one's neighbourhood.
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| cells[a].total_cmp(&cells[b]).then(a.cmp(&b)));
    let (mut r1, mut p1, mut chi2) = (0.0, 0.0, f64::INFINITY);
    for &k in order.iter().take(REFINE_CANDIDATES) {
        let (r0, p0) = (rs[k / phis.len()], phis[k % phis.len()]);
        let rf = axis(
            (r0 - 2.0 * grid.coarse_dr_nm).max(0.0),
            (r0 + 2.0 * grid.coarse_dr_nm).min(r_max),
            grid.fine_dr_nm,
            r0,
        );
        let pf = axis(
            (p0 - 2.0 * grid.coarse_dphi_deg).max(0.0),
            (p0 + 2.0 * grid.coarse_dphi_deg).min(90.0),
            grid.fine_dphi_deg,
            p0,
        );
        let (r, p, c, _) = problem.search(&rf, &pf);
        if c < chi2 || (c == chi2 && (r, p) < (r1, p1)) {
            (r1, p1, chi2) = (r, p, c);
        }
    }
    if !chi2.is_finite() {
        return Err(Error::Unresolvable("no grid point yields a finite residual".into()));
    }
    let position = QDPosition::degrees(r1, p1)?;
    let predicted = forward_amplitudes(catalog, &problem.labels, &grid.reference, &position)?;
    let comparison = problem
        .labels
        .iter()
        .zip(&problem.measured)
        .zip(predicted)
        .map(|((l, m), p)| ModeComparison {
            label: l.to_string(),
            measured: *m,
            predicted: p,
        })
        .collect();
    Ok((
        LocalizationResult {
            position,
            r_nm: r1,
            phi_deg: p1,
            chi2,
            comparison,
        },
        ResidualMap {
            r_nm: rs,
            phi_deg: phis,
            chi2: cells,
        },
    ))
}
