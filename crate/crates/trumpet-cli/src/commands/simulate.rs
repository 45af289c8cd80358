use crate::config::{Loaded, MechanicsMode, SimulateConfig, TagFormat};
use crate::error::CliResult;
use crate::output::{config_line, hex, OutDir};
use serde_json::json;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use trumpet_core::analysis::simulate_rf_scan;
use trumpet_core::simulator::{simulate_displacement_stream, TimeTrace};
use trumpet_core::units::to_hz;

pub struct SimulateReport {
    pub events: usize,
    pub detected_rate: f64,
    pub tags_file: String,
}

pub fn run(cfg: &Loaded<SimulateConfig>, out: &Path) -> CliResult<SimulateReport> {
    let sim = cfg.build()?;
    let c = &cfg.value;
    let header = config_line(c);
    let mut dir = OutDir::create(out)?;
    let tags = match c.mechanics {
        MechanicsMode::Exact => sim.run()?,
        MechanicsMode::Sampled => sim.run_sampled()?,
    };
    let tags_file = match c.tag_format {
        TagFormat::Binary => {
            let mut buf = Vec::with_capacity(52 + 9 * tags.len());
            tags.write_binary(&mut buf)?;
            dir.write("tags.ptag", &buf)?;
            "tags.ptag"
        }
        TagFormat::Csv => {
            let mut buf = Vec::with_capacity(24 * tags.len() + 256);
            writeln!(buf, "# {header}")?;
            tags.write_csv(&mut buf)?;
            dir.write("tags.csv", &buf)?;
            "tags.csv"
        }
    };
    if let Some(bin) = c.trace_bin_s {
        let trace = TimeTrace::from_tags(&tags, bin, None)?;
        let mut buf = Vec::new();
        writeln!(buf, "# {header}")?;
        trace.write_csv(&mut buf)?;
        dir.write("trace.csv", &buf)?;
    }
    if c.write_displacement {
        // Same mechanics streams as the sampled photon run.
        let trajectories = sim
            .modes
            .iter()
            .enumerate()
            .map(|(k, mc)| simulate_displacement_stream(&mc.mode, sim.temperature, sim.duration, sim.dt, sim.seed, k as u32))
            .collect::<Result<Vec<_>, _>>()?;
        let mut s = format!("# {header}\nt_s");
        for mc in &sim.modes {
            let _ = write!(s, ",u_{}_m", mc.mode.label);
        }
        s.push('\n');
        let n = trajectories.iter().map(|t| t.samples.len()).min().unwrap_or(0);
        for i in 0..n {
            let _ = write!(s, "{:.9e}", i as f64 * sim.dt);
            for t in &trajectories {
                let _ = write!(s, ",{:.9e}", t.samples[i]);
            }
            s.push('\n');
        }
        dir.write("displacement.csv", s.as_bytes())?;
    }
    if let Some(scan) = &c.rf_scan {
        let grid = scan.grid(cfg)?;
        let pts = simulate_rf_scan(&sim, &grid, scan.dwell_s)?;
        let mut s = format!("# {header}\ndetuning_over_2pi_Hz,rate_per_s,sigma_per_s\n");
        for p in &pts {
            let _ = writeln!(s, "{:.9e},{:.9e},{:.9e}", to_hz(p.detuning), p.rate, p.sigma);
        }
        dir.write("rf_scan.csv", s.as_bytes())?;
    }
    let events = tags.len();
    let detected_rate = tags.rate();
    let config = json!({
        "simulate": c,
        "simulation_digest": hex(&sim.digest()),
        "resolved": {
            "detuning_over_2pi_Hz": to_hz(sim.drive.detuning),
            "rabi_per_s": sim.drive.omega_r,
            "dt_s": sim.dt,
            "couplings_over_2pi_Hz": sim.modes.iter().map(|m| (m.mode.label.clone(), to_hz(m.lambda))).collect::<Vec<_>>(),
        },
    });
    dir.finish("simulate", config)?;
    Ok(SimulateReport {
        events,
        detected_rate,
        tags_file: tags_file.into(),
    })
}
