//! Named runs that regenerate the standard figures from generated configurations.

use crate::commands::{analyze, budget, localize, simulate};
use crate::config::*;
use crate::error::{invalid, CliResult};
use crate::output::{config_line, OutDir};
use crate::svg::{Plot, Series, PALETTE};
use serde::Serialize;
use serde_json::json;
use std::fmt::Write as _;
use std::path::PathBuf;
use trumpet_core::analysis::forward_amplitudes;
use trumpet_core::mechanics::ModeCatalog;
use trumpet_core::noisebudget::{min_heisenberg_product, DetuningPolicy, NoiseBudget};
use trumpet_core::presets;
use trumpet_core::units::{to_hz, HBAR};

pub const RECIPES: &[(&str, &str)] = [
    ("fig2a", "device read-out of F1x and F1y: NPSD with peak areas"),
    ("fig2b", "RF scan, detuning series and coupling fit for F1x"),
    ("fig3b", "localization from the mode ladder at (35 nm, 20°)"),
    ("fig4a", "noise budget vs drive, λ = 0.5·√(γ_sp·γ_m)"),
    ("fig4b", "noise budget vs drive, λ = 10·√(γ_sp·γ_m)"),
    ("fig4c", "minimum imprecision–back-action product vs drive"),
    ("figs2", "back-action force noise vs drive"),
    ("figs3", "imprecision vs drive"),
    ("figs4", "budgets at λ = 0.1 and 10·√(γ_sp·γ_m) and spectra at the SQL drive"),
]
.as_slice();

pub struct RecipeOptions {
    pub name: String,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub duration: Option<f64>,
}

struct Recipe<'a> {
    opts: &'a RecipeOptions,
    dir: OutDir,
    log: Vec<String>,
}

impl Recipe<'_> {
    fn sub(&self, name: &str) -> PathBuf {
        self.opts.out.join(name)
    }

    /// Writes `configs/<name>.json` and loads it back as a file-backed configuration.
    fn config<T: Serialize + serde::de::DeserializeOwned>(&mut self, name: &str, v: &T) -> CliResult<Loaded<T>> {
        let rel = format!("configs/{name}.json");
        let p = self.dir.write(&rel, format!("{}\n", to_json_pretty(v)).as_bytes())?;
        Loaded::read(&p)
    }

    fn seed(&self, default: u64) -> u64 {
        self.opts.seed.unwrap_or(default)
    }

    fn duration(&self, default: f64) -> f64 {
        self.opts.duration.unwrap_or(default)
    }
}

fn ideal_scaled(k: f64) -> BudgetConfig {
    let mut c = BudgetConfig::ideal();
    c.readout.lambda_sqrt_gamma_sp_gamma_m = Some(k);
    c
}

fn drive_sweep(mut c: BudgetConfig, points: usize) -> BudgetConfig {
    c.sweep = Some(SweepSpec::rabi_in_gamma_sp(1e-3, 1e2, points, DetuningPolicy::AtHalfWidth));
    c
}

fn budget_step(r: &mut Recipe, name: &str, cfg: BudgetConfig) -> CliResult<budget::BudgetReport> {
    let loaded = r.config(name, &cfg)?;
    let rep = budget::run(&loaded, &r.sub(name))?;
    r.log.push(format!("{name}: budget written to {}", r.sub(name).display()));
    Ok(rep)
}

fn column_svg(rows: &[trumpet_core::noisebudget::BudgetRow], gamma_sp: f64, f: fn(&NoiseBudget) -> f64, title: &str, y: &str, meta: &str) -> String {
    let pts = rows
        .iter()
        .map(|r| (r.value / gamma_sp, f(&r.budget)))
        .filter(|(_, v)| v.is_finite() && *v > 0.0)
        .collect();
    Plot {
        title: title.into(),
        x_label: "Ω_R/γ_sp".into(),
        y_label: y.into(),
        x_log: true,
        y_log: true,
        series: vec![Series::new(y, pts, PALETTE[0])],
        metadata: meta.into(),
        ..Plot::default()
    }
    .render()
}

fn fig4(r: &mut Recipe, k: f64) -> CliResult<()> {
    let name = r.opts.name.clone();
    budget_step(r, &name, drive_sweep(ideal_scaled(k), 121))?;
    Ok(())
}

fn fig4c(r: &mut Recipe) -> CliResult<()> {
    let cfg = drive_sweep(BudgetConfig::ideal(), 121);
    budget_step(r, "fig4c", cfg.clone())?;
    let readout = Loaded::inline(cfg.clone(), "fig4c").build()?;
    let gamma_sp = readout.emitter.gamma_sp;
    let header = config_line(&cfg);
    let floor = (HBAR / 2.0).powi(2);
    let mut s = format!("# {header}\nrabi_gamma_sp,min_product_over_hbar_half_squared,closed_form\n");
    let (mut num, mut closed) = (Vec::new(), Vec::new());
    for x in trumpet_core::noisebudget::log_grid(1e-3, 1e2, 121) {
        let (_, p) = min_heisenberg_product(&readout.at_drive(x * gamma_sp))?;
        let c = 1.0 + 2.0 * x * x;
        let _ = writeln!(s, "{x:e},{:.12e},{c:.12e}", p / floor);
        num.push((x, p / floor));
        closed.push((x, c));
    }
    r.dir.write("fig4c.csv", s.as_bytes())?;
    let svg = Plot {
        title: "min S_xx^I·S_FF/(ħ/2)² over Δ".into(),
        x_label: "Ω_R/γ_sp".into(),
        y_label: "product/(ħ/2)²".into(),
        x_log: true,
        y_log: true,
        series: vec![
            Series::new("numerical", num, PALETTE[0]),
            Series::new("1 + 2(Ω_R/γ_sp)²", closed, PALETTE[1]).dashed(),
        ],
        hlines: vec![(1.0, "ħ/2".into())],
        metadata: header,
        ..Plot::default()
    }
    .render();
    r.dir.write("fig4c.svg", svg.as_bytes())?;
    Ok(())
}

fn figs2(r: &mut Recipe, imprecision: bool) -> CliResult<()> {
    let name = r.opts.name.clone();
    let cfg = drive_sweep(BudgetConfig::ideal(), 121);
    let rep = budget_step(r, &name, cfg.clone())?;
    let rows = rep.rows.expect("sweep rows");
    let meta = config_line(&cfg);
    let svg = if imprecision {
        column_svg(&rows, 1e9, |b| b.s_xx_imprecision, "Imprecision at ω_m", "S_xx^I (m²/Hz)", &meta)
    } else {
        column_svg(&rows, 1e9, |b| b.s_ff_backaction, "Back-action force noise", "S_FF (N²/Hz)", &meta)
    };
    r.dir.write(&format!("{name}.svg"), svg.as_bytes())?;
    Ok(())
}

fn figs4(r: &mut Recipe) -> CliResult<()> {
    budget_step(r, "figs4a", drive_sweep(ideal_scaled(0.1), 121))?;
    budget_step(r, "figs4b", drive_sweep(ideal_scaled(10.0), 121))?;
    let mut c = BudgetConfig::ideal();
    c.frequency_sweep = Some(FrequencySweepSpec {
        from_over_2pi_Hz: 500e3,
        to_over_2pi_Hz: 720e3,
        points: 441,
        at_sql_drive: true,
    });
    let rep = budget_step(r, "figs4c", c)?;
    if let Some(sql) = rep.summary.get("sql") {
        r.log.push(format!("figs4c: SQL drive {}", sql));
    }
    Ok(())
}

fn analyze_device(windows: &[&str], cat: &ModeCatalog) -> AnalyzeConfig {
    let mut a = AnalyzeConfig::default();
    a.localize = false;
    a.segment_bins = Some(1 << 18);
    a.windows = windows
        .iter()
        .map(|l| WindowSpec {
            label: Some(l.to_string()),
            center_Hz: cat.get(l).expect("catalog mode").freq_hz(),
            half_width_Hz: 5e3,
        })
        .collect();
    a
}

fn fig2a(r: &mut Recipe) -> CliResult<()> {
    let cat = ModeCatalog::default_device();
    let sim = SimulateConfig::device(&["F1x", "F1y"], r.duration(1200.0), r.seed(11));
    let loaded = r.config("simulate", &sim)?;
    let rep = simulate::run(&loaded, &r.sub("simulate"))?;
    r.log.push(format!("simulate: {} events, ⟨Ṅ_d⟩ = {:.4e} s⁻¹", rep.events, rep.detected_rate));
    let mut a = analyze_device(&["F1x", "F1y"], &cat);
    a.sensitivity = Some(SensitivitySpec {
        mode: "F1x".into(),
        lambda_over_2pi_Hz: to_hz(cat.coupling("F1x").expect("F1x coupling")),
        detuning_over_2pi_Hz: to_hz(presets::device_half_width()),
    });
    let loaded = r.config("analyze", &a)?;
    let opts = analyze::AnalyzeOptions {
        input: r.sub("simulate").join(&rep.tags_file),
        g2: false,
    };
    let rep = analyze::run(&loaded, &opts, &r.sub("analyze"))?;
    for p in &rep.peaks {
        r.log.push(format!(
            "{}: f = {:.1} Hz, area = {:.3e} ± {:.1e}",
            p.label.as_deref().unwrap_or("?"),
            p.center_Hz,
            p.area,
            p.uncertainty
        ));
    }
    Ok(())
}

fn fig2b(r: &mut Recipe) -> CliResult<()> {
    let cat = ModeCatalog::default_device();
    let main = r.duration(1200.0);
    let seed = r.seed(11);
    let mut rf = SimulateConfig::device(&["F1x"], 0.01, seed);
    rf.rf_scan = Some(RfScanSpec {
        from_over_2pi_Hz: -4e9,
        to_over_2pi_Hz: 4e9,
        points: 41,
        dwell_s: 2.0,
    });
    let loaded = r.config("simulate_rf", &rf)?;
    simulate::run(&loaded, &r.sub("simulate_rf"))?;
    let mut records = Vec::new();
    let mut primary = None;
    for (i, k) in [1.0, -1.0, 0.5, 2.0, 0.0].into_iter().enumerate() {
        let name = format!("simulate_{i}");
        let mut c = SimulateConfig::device(&["F1x", "F1y"], if i == 0 { main } else { main / 4.0 }, seed + i as u64);
        c.drive.detuning_half_widths = Some(k);
        let loaded = r.config(&name, &c)?;
        let rep = simulate::run(&loaded, &r.sub(&name))?;
        let input = PathBuf::from("..").join(&name).join(&rep.tags_file);
        records.push(RecordSpec {
            input: input.clone(),
            detuning_over_2pi_Hz: k * to_hz(presets::device_half_width()),
        });
        r.log.push(format!("{name}: Δ = {k}·Γ_inh, {} events", rep.events));
        primary.get_or_insert(r.sub(&name).join(&rep.tags_file));
    }
    let mut a = analyze_device(&["F1x"], &cat);
    a.rf_scan = Some(PathBuf::from("../simulate_rf/rf_scan.csv"));
    a.coupling = Some(CouplingSpec {
        mode: "F1x".into(),
        temperature_K: presets::TEMPERATURE,
        half_width_Hz: 5e3,
        records,
    });
    let loaded = r.config("analyze", &a)?;
    let opts = analyze::AnalyzeOptions {
        input: primary.expect("primary record"),
        g2: false,
    };
    let rep = analyze::run(&loaded, &opts, &r.sub("analyze"))?;
    if let Some(f) = &rep.coupling {
        r.log.push(format!(
            "λ/2π = {:.1} ± {:.1} kHz",
            to_hz(f.lambda) / 1e3,
            to_hz(f.std_error()) / 1e3
        ));
    }
    Ok(())
}

const LADDER: [&str; 6] = ["F1y", "F1x", "B1", "F2x", "B2", "F3x"];

fn fig3b(r: &mut Recipe) -> CliResult<()> {
    let cat = ModeCatalog::default_device();
    let pos = trumpet_core::mechanics::QDPosition::degrees(35.0, 20.0)?;
    let amps = forward_amplitudes(&cat, &LADDER, "B2", &pos)?;
    let mut s = String::from("# forward amplitudes at r = 35 nm, phi = 20 deg\nlabel,amplitude\n");
    for (l, a) in LADDER.iter().zip(&amps) {
        let _ = writeln!(s, "{l},{a:.12e}");
    }
    let amp_path = r.dir.write("amplitudes.csv", s.as_bytes())?;
    let loaded = r.config("localize", &LocalizeConfig::default())?;
    let rep = localize::run(
        &loaded,
        &localize::LocalizeOptions {
            input: amp_path,
            reference: None,
        },
        &r.sub("localize"),
    )?;
    r.log.push(format!(
        "forward model: r = {} nm, φ = {}°, χ² = {:.3e}",
        rep.result.r_nm, rep.result.phi_deg, rep.result.chi2
    ));

    let mut sim = SimulateConfig::device(&LADDER, r.duration(0.15), r.seed(19));
    sim.qd_position = Some(PositionSpec { r_nm: 35.0, phi_deg: 20.0 });
    sim.efficiency = 1.0;
    sim.blinking = BlinkingSpec::none();
    let loaded = r.config("simulate", &sim)?;
    let srep = simulate::run(&loaded, &r.sub("simulate"))?;
    r.log.push(format!("ladder simulation: {} events", srep.events));
    let loaded = r.config("analyze", &AnalyzeConfig::default())?;
    let opts = analyze::AnalyzeOptions {
        input: r.sub("simulate").join(&srep.tags_file),
        g2: true,
    };
    let arep = analyze::run(&loaded, &opts, &r.sub("analyze"))?;
    let found: Vec<&str> = arep
        .peaks_g2
        .iter()
        .flatten()
        .filter_map(|p| p.mode.as_deref())
        .collect();
    r.log.push(format!("g² peaks assigned: {}", found.join(", ")));
    match &arep.localization {
        Some(l) => r.log.push(format!("simulated ladder: r = {} nm, φ = {}°", l.r_nm, l.phi_deg)),
        None => r.log.extend(arep.notes.iter().cloned()),
    }
    Ok(())
}

pub fn run(opts: &RecipeOptions) -> CliResult<Vec<String>> {
    if !RECIPES.iter().any(|(n, _)| *n == opts.name) {
        let names: Vec<&str> = RECIPES.iter().map(|(n, _)| *n).collect();
        return invalid(format!("unknown recipe '{}' (known: {})", opts.name, names.join(", ")));
    }
    if let Some(d) = opts.duration {
        if !(d > 0.0 && d.is_finite()) {
            return invalid(format!("--duration must be positive, got {d}"));
        }
    }
    let mut r = Recipe {
        opts,
        dir: OutDir::create(&opts.out)?,
        log: Vec::new(),
    };
    match opts.name.as_str() {
        "fig2a" => fig2a(&mut r)?,
        "fig2b" => fig2b(&mut r)?,
        "fig3b" => fig3b(&mut r)?,
        "fig4a" => fig4(&mut r, 0.5)?,
        "fig4b" => fig4(&mut r, 10.0)?,
        "fig4c" => fig4c(&mut r)?,
        "figs2" => figs2(&mut r, false)?,
        "figs3" => figs2(&mut r, true)?,
        "figs4" => figs4(&mut r)?,
        _ => unreachable!(),
    }
    let log = std::mem::take(&mut r.log);
    r.dir.finish(
        &format!("recipe {}", opts.name),
        json!({ "recipe": opts.name, "seed": opts.seed, "duration_s": opts.duration }),
    )?;
    Ok(log)
}
