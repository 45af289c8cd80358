use super::read_amplitudes;
use crate::config::{load_catalog, LocalizeConfig, Loaded};
use crate::error::CliResult;
use crate::output::{config_line, OutDir};
use crate::svg::heatmap;
use serde_json::json;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use trumpet_core::analysis::{localize_qd, LocalizationResult, ResidualMap};

pub struct LocalizeOptions {
    pub input: PathBuf,
    pub reference: Option<String>,
}

pub struct LocalizeReport {
    pub result: LocalizationResult,
}

pub fn residual_csv(map: &ResidualMap, header: &str) -> String {
    let mut s = format!("# {header}\nr_nm,phi_deg,chi2\n");
    let nphi = map.phi_deg.len();
    for (i, r) in map.r_nm.iter().enumerate() {
        for (j, p) in map.phi_deg.iter().enumerate() {
            let _ = writeln!(s, "{r:.3},{p:.3},{:.9e}", map.chi2[i * nphi + j]);
        }
    }
    s
}

pub fn run(cfg: &Loaded<LocalizeConfig>, opts: &LocalizeOptions, out: &Path) -> CliResult<LocalizeReport> {
    let c = &cfg.value;
    let catalog_path = match &c.catalog {
        Some(p) => Some(cfg.file("catalog", p)?),
        None => None,
    };
    let cat = load_catalog(catalog_path.as_deref())?;
    let mut grid = c.grid.clone();
    if let Some(r) = &opts.reference {
        grid.reference = r.clone();
    }
    let amps = read_amplitudes(&opts.input)?;
    let (result, map) = localize_qd(&amps, &cat, &grid)?;
    let echo = json!({
        "localize": { "catalog": c.catalog, "grid": grid },
        "input": opts.input.display().to_string(),
        "amplitudes": amps,
    });
    let header = config_line(&echo);
    let mut dir = OutDir::create(out)?;
    dir.write_json("localization.json", &json!({ "config": echo, "result": result }))?;
    dir.write("residual_map.csv", residual_csv(&map, &header).as_bytes())?;
    let svg = heatmap(
        "χ² residual map",
        "r (nm)",
        "φ (deg)",
        &map.r_nm,
        &map.phi_deg,
        &map.chi2,
        Some((result.r_nm, result.phi_deg)),
        &header,
    );
    dir.write("residual_map.svg", svg.as_bytes())?;
    dir.finish("localize", echo)?;
    Ok(LocalizeReport { result })
}
