//! `trumpet`: simulate, analyze and budget quantum-dot read-out of nanowire
//! mechanics.

mod commands;
mod config;
mod error;
mod output;
mod recipes;
mod svg;

use clap::{Parser, Subcommand};
use commands::{analyze, budget, localize, simulate};
use config::{AnalyzeConfig, BudgetConfig, LocalizeConfig, Loaded};
use error::{CliError, CliResult};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "trumpet", version, about = "Quantum-dot read-out of nanowire mechanics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a photon-tag record from a simulation config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config duration, s.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Spectra, peak areas, localization and coupling fits from a record.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also build the spectrum from the two-channel g²(τ).
        #[arg(long)]
        g2: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Noise budget at one operating point, with optional sweeps.
    Budget {
        #[arg(long, conflicts_with_all = ["mode", "ideal"])]
        config: Option<PathBuf>,
        /// Device read-out of this catalog mode.
        #[arg(long)]
        mode: Option<String>,
        /// Idealized probe.
        #[arg(long, conflicts_with = "mode")]
        ideal: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Emitter position from a `label,amplitude` table.
    Localize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Reference mode; overrides the config.
        #[arg(long)]
        reference: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Regenerate a standard figure; `trumpet recipe list` shows the names.
    Recipe {
        name: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Record duration for recipes that simulate, s.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn init_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("TRUMPET_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("TRUMPET_THREADS must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(CliError::Validation("TRUMPET_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn opt_config<T: Default + serde::de::DeserializeOwned>(p: Option<PathBuf>, name: &str) -> CliResult<Loaded<T>> {
    match p {
        Some(p) => Loaded::read(&p),
        None => Ok(Loaded::inline(T::default(), name)),
    }
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$e}")).unwrap_or_else(|| "-".into())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { config, seed, duration, out } => {
            let mut cfg: Loaded<config::SimulateConfig> = Loaded::read(&config)?;
            if let Some(s) = seed {
                cfg.value.seed = s;
            }
            if let Some(d) = duration {
                cfg.value.duration_s = d;
            }
            let rep = simulate::run(&cfg, &out)?;
            println!(
                "{} events, detected rate {:.4e} s⁻¹, wrote {}",
                rep.events,
                rep.detected_rate,
                out.join(&rep.tags_file).display()
            );
        }
        Command::Analyze { input, config, g2, out } => {
            let cfg: Loaded<AnalyzeConfig> = opt_config(config, "analyze")?;
            let rep = analyze::run(&cfg, &analyze::AnalyzeOptions { input, g2 }, &out)?;
            println!("mean rate {:.4e} s⁻¹, rbw {:.3} Hz", rep.mean_rate, rep.rbw);
            let mut tables = vec![("trace", &rep.peaks)];
            if let Some(p) = &rep.peaks_g2 {
                tables.push(("g2", p));
            }
            for (name, rows) in tables {
                println!("{name} peaks:");
                println!("  {:<6} {:>14} {:>12} {:>10} {:>8}", "mode", "center (Hz)", "area", "sigma", "signif");
                for r in rows {
                    let id = r.mode.as_deref().or(r.label.as_deref()).unwrap_or("?");
                    println!(
                        "  {:<6} {:>14.1} {:>12.4e} {:>10.2e} {:>8.1}",
                        id, r.center_Hz, r.area, r.uncertainty, r.significance
                    );
                }
            }
            if let Some(l) = &rep.localization {
                println!("position r = {} nm, phi = {} deg, chi2 = {:.3e}", l.r_nm, l.phi_deg, l.chi2);
            }
            if let Some(f) = &rep.rf_fit {
                println!(
                    "RF fit: Lorentzian FWHM/2pi {:.4} GHz, Gaussian FWHM/2pi {:.4} GHz",
                    trumpet_core::units::to_hz(f.params.lorentzian_fwhm) / 1e9,
                    trumpet_core::units::to_hz(f.params.gaussian_fwhm) / 1e9
                );
            }
            if let Some(c) = &rep.coupling {
                println!(
                    "coupling lambda/2pi = {:.2} +- {:.2} kHz",
                    trumpet_core::units::to_hz(c.lambda) / 1e3,
                    trumpet_core::units::to_hz(c.std_error()) / 1e3
                );
            }
            if let Some(s) = &rep.sensitivity {
                println!("sensitivity {}: {:.3e} m/sqrt(Hz)", s.mode, s.sqrt_s_xx_m_per_sqrt_Hz);
            }
            for n in &rep.notes {
                eprintln!("note: {n}");
            }
        }
        Command::Budget { config, mode, ideal, out } => {
            let cfg = match (config, mode, ideal) {
                (Some(p), _, _) => Loaded::read(&p)?,
                (None, Some(m), false) => Loaded::inline(BudgetConfig::device(&m), "budget"),
                (None, None, true) => Loaded::inline(BudgetConfig::ideal(), "budget"),
                _ => return Err(CliError::Validation("give --config, --mode LABEL or --ideal".into())),
            };
            let rep = budget::run(&cfg, &out)?;
            let s = &rep.summary;
            let f = |a: &str, b: &str| s[a][b].as_f64();
            println!("mode {}", s["mode"]["label"].as_str().unwrap_or("?"));
            println!("  u_zpf {} m, u_th {} m, n_th {}", fmt_opt(f("mode", "u_zpf_m"), 3), fmt_opt(f("mode", "u_th_m"), 3), fmt_opt(f("mode", "n_thermal"), 3));
            println!(
                "  Gamma_opt/2pi {} Hz, C {}, dephasing/2pi {} Hz",
                fmt_opt(f("figures_of_merit", "gamma_opt_over_2pi_Hz"), 3),
                fmt_opt(f("figures_of_merit", "cooperativity"), 3),
                fmt_opt(f("figures_of_merit", "dephasing_over_2pi_Hz"), 3)
            );
            println!(
                "  S_I^1/2 {} m/sqrt(Hz), S_BA {} m^2/Hz",
                fmt_opt(f("noise_at_omega_m", "sqrt_s_xx_imprecision_m_per_sqrt_Hz"), 3),
                fmt_opt(f("noise_at_omega_m", "s_xx_backaction_m2_per_Hz"), 3)
            );
            if let Some(rows) = &rep.rows {
                println!("  sweep: {} rows", rows.len());
            }
        }
        Command::Localize { input, config, reference, out } => {
            let cfg: Loaded<LocalizeConfig> = opt_config(config, "localize")?;
            let rep = localize::run(&cfg, &localize::LocalizeOptions { input, reference }, &out)?;
            let r = &rep.result;
            println!("position r = {} nm, phi = {} deg, chi2 = {:.4e}", r.r_nm, r.phi_deg, r.chi2);
            println!("  {:<6} {:>12} {:>12}", "mode", "measured", "predicted");
            for c in &r.comparison {
                println!("  {:<6} {:>12.4e} {:>12.4e}", c.label, c.measured, c.predicted);
            }
        }
        Command::Recipe { name, seed, duration, out } => {
            if name == "list" {
                for (n, d) in recipes::RECIPES {
                    println!("{n:<7} {d}");
                }
                return Ok(());
            }
            let log = recipes::run(&recipes::RecipeOptions { name, out: out.clone(), seed, duration })?;
            for l in log {
                println!("{l}");
            }
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("trumpet: {e}");
        return e.exit_code();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trumpet: {e}");
            e.exit_code()
        }
    }
}
