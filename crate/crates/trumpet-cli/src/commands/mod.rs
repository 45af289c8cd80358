pub mod analyze;
pub mod budget;
pub mod localize;
pub mod simulate;

use crate::error::{invalid, CliError, CliResult};
use std::path::Path;
use trumpet_core::analysis::{ModeAmplitude, RfPoint};
use trumpet_core::simulator::{PhotonTags, TimeTrace};
use trumpet_core::units::hz;

/// Photon record or binned trace, recognized from the file contents.
pub enum Record {
    Tags(PhotonTags),
    Trace(TimeTrace),
}

fn first_data_line(text: &str) -> Option<&str> {
    text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'))
}

pub fn read_record(path: &Path) -> CliResult<Record> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Validation(format!("{}: cannot read: {e}", path.display())))?;
    let ctx = |e: trumpet_core::Error| CliError::from(e).context(path.display());
    if bytes.is_empty() {
        return invalid(format!("{}: input file is empty", path.display()));
    }
    if bytes.starts_with(b"PTAG") {
        return Ok(Record::Tags(PhotonTags::from_bytes(&bytes).map_err(ctx)?));
    }
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| CliError::Validation(format!("{}: decode error: neither a PTAG file nor text", path.display())))?;
    match first_data_line(text) {
        Some("timestamp_ps,channel") => Ok(Record::Tags(PhotonTags::read_csv(text.as_bytes()).map_err(ctx)?)),
        Some("bin_start_s,counts") => Ok(Record::Trace(TimeTrace::read_csv(text.as_bytes()).map_err(ctx)?)),
        Some(h) => invalid(format!(
            "{}: decode error: unrecognized header '{h}' (expected a PTAG file, a tag CSV or a trace CSV)",
            path.display()
        )),
        None => invalid(format!("{}: input contains no records", path.display())),
    }
}

/// `label,amplitude` rows; `#` lines are comments.
pub fn read_amplitudes(path: &Path) -> CliResult<Vec<ModeAmplitude>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: cannot read: {e}", path.display())))?;
    let mut out = Vec::new();
    let mut header = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |m: &str| CliError::Validation(format!("{}:{}: {m}", path.display(), i + 1));
        if !header {
            if line != "label,amplitude" {
                return Err(err("expected header 'label,amplitude'"));
            }
            header = true;
            continue;
        }
        let (l, a) = line.split_once(',').ok_or_else(|| err("expected two fields"))?;
        let amplitude: f64 = a.trim().parse().map_err(|_| err("bad amplitude"))?;
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(err("amplitude must be finite and non-negative"));
        }
        out.push(ModeAmplitude {
            label: l.trim().to_string(),
            amplitude,
        });
    }
    if !header {
        return invalid(format!("{}: missing 'label,amplitude' header", path.display()));
    }
    Ok(out)
}

/// `detuning_over_2pi_Hz,rate_per_s,sigma_per_s` rows as written by `simulate`.
pub fn read_rf_scan(path: &Path) -> CliResult<Vec<RfPoint>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: cannot read: {e}", path.display())))?;
    let mut out = Vec::new();
    let mut header = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |m: &str| CliError::Validation(format!("{}:{}: {m}", path.display(), i + 1));
        if !header {
            if line != "detuning_over_2pi_Hz,rate_per_s,sigma_per_s" {
                return Err(err("expected header 'detuning_over_2pi_Hz,rate_per_s,sigma_per_s'"));
            }
            header = true;
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| err("bad number"))?;
        if f.len() != 3 {
            return Err(err("expected three fields"));
        }
        out.push(RfPoint {
            detuning: hz(f[0]),
            rate: f[1],
            sigma: f[2],
        });
    }
    Ok(out)
}
