//! Photon time tags, binned traces and their file formats.
//!
//! Binary layout (little-endian): magic `PTAG`, version u32, channel count
//! u32, duration u64 (ps), SHA-256 config digest (32 bytes), then 9-byte
//! records of timestamp u64 (ps) and channel u8.

use crate::error::{ensure, Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Read, Write};

pub const PS: f64 = 1e-12;
const MAGIC: &[u8; 4] = b"PTAG";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 32;

/// Seconds to integer picoseconds.
#[inline]
pub fn to_ps(t: f64) -> u64 {
    (t / PS).round() as u64
}

/// Time-ordered detection events. Timestamps have 1 ps resolution.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PhotonTags {
    pub times_ps: Vec<u64>,
    pub channels: Vec<u8>,
    pub n_channels: u8,
    pub duration_ps: u64,
    pub digest: [u8; 32],
}

impl PhotonTags {
    pub fn empty(n_channels: u8, duration_ps: u64, digest: [u8; 32]) -> Self {
        PhotonTags {
            times_ps: Vec::new(),
            channels: Vec::new(),
            n_channels,
            duration_ps,
            digest,
        }
    }

    pub fn len(&self) -> usize {
        self.times_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_ps.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.duration_ps as f64 * PS
    }

    pub fn push(&mut self, t_ps: u64, channel: u8) {
        self.times_ps.push(t_ps);
        self.channels.push(channel);
    }

    /// Timestamps (ps) of one channel.
    pub fn channel(&self, c: u8) -> Vec<u64> {
        self.times_ps
            .iter()
            .zip(&self.channels)
            .filter(|(_, &ch)| ch == c)
            .map(|(&t, _)| t)
            .collect()
    }

    pub fn count(&self, c: u8) -> usize {
        self.channels.iter().filter(|&&ch| ch == c).count()
    }

    /// Mean detection rate over all channels, s⁻¹.
    pub fn rate(&self) -> f64 {
        self.len() as f64 / self.duration()
    }

    /// Checks ordering, channel range and the time window.
    pub fn validate(&self) -> Result<()> {
        ensure(self.times_ps.len() == self.channels.len(), || {
            "timestamp and channel arrays differ in length".into()
        })?;
        ensure(self.n_channels >= 1, || "channel count must be at least 1".into())?;
        let mut last = vec![None::<u64>; self.n_channels as usize];
        let mut prev = 0u64;
        for (&t, &c) in self.times_ps.iter().zip(&self.channels) {
            ensure((c as usize) < last.len(), || format!("channel {c} out of range"))?;
            ensure(t <= self.duration_ps, || format!("timestamp {t} ps beyond duration"))?;
            ensure(t >= prev, || "timestamps are not sorted".into())?;
            if let Some(l) = last[c as usize] {
                ensure(t > l, || format!("timestamps not strictly increasing on channel {c}"))?;
            }
            last[c as usize] = Some(t);
            prev = t;
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.n_channels as u32).to_le_bytes())?;
        w.write_all(&self.duration_ps.to_le_bytes())?;
        w.write_all(&self.digest)?;
        let mut buf = Vec::with_capacity(9 * 4096);
        for chunk in self.times_ps.chunks(4096).zip(self.channels.chunks(4096)) {
            buf.clear();
            for (t, c) in chunk.0.iter().zip(chunk.1) {
                buf.extend_from_slice(&t.to_le_bytes());
                buf.push(*c);
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[0..4] != MAGIC {
            return Err(Error::Decode("not a PTAG file (bad magic or short header)".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Decode(format!("unsupported PTAG version {version}")));
        }
        let n_channels = u32_at(8);
        if n_channels == 0 || n_channels > 255 {
            return Err(Error::Decode(format!("invalid channel count {n_channels}")));
        }
        let duration_ps = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let digest: [u8; 32] = bytes[20..52].try_into().unwrap();
        let body = &bytes[HEADER_LEN..];
        if body.len() % 9 != 0 {
            return Err(Error::Decode("truncated record at end of file".into()));
        }
        let n = body.len() / 9;
        let mut tags = PhotonTags {
            times_ps: Vec::with_capacity(n),
            channels: Vec::with_capacity(n),
            n_channels: n_channels as u8,
            duration_ps,
            digest,
        };
        for rec in body.chunks_exact(9) {
            tags.push(u64::from_le_bytes(rec[0..8].try_into().unwrap()), rec[8]);
        }
        tags.validate().map_err(|e| Error::Decode(e.to_string()))?;
        Ok(tags)
    }

    /// CSV export: `#`-prefixed metadata, then `timestamp_ps,channel`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# n_channels={}", self.n_channels)?;
        writeln!(w, "# duration_ps={}", self.duration_ps)?;
        writeln!(w, "# digest={}", hex(&self.digest))?;
        writeln!(w, "timestamp_ps,channel")?;
        for (t, c) in self.times_ps.iter().zip(&self.channels) {
            writeln!(w, "{t},{c}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut tags = PhotonTags::default();
        let mut header_seen = false;
        let (mut have_n, mut have_d) = (false, false);
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let dec = |m: &str| Error::Decode(format!("line {}: {m}", lineno + 1));
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                if let Some(v) = meta.strip_prefix("n_channels=") {
                    tags.n_channels = v.parse().map_err(|_| dec("bad channel count"))?;
                    have_n = true;
                } else if let Some(v) = meta.strip_prefix("duration_ps=") {
                    tags.duration_ps = v.parse().map_err(|_| dec("bad duration"))?;
                    have_d = true;
                } else if let Some(v) = meta.strip_prefix("digest=") {
                    tags.digest = unhex(v).ok_or_else(|| dec("bad digest"))?;
                }
                continue;
            }
            if !header_seen {
                if line.trim() != "timestamp_ps,channel" {
                    return Err(dec("expected header 'timestamp_ps,channel'"));
                }
                header_seen = true;
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| dec("expected two fields"))?;
            let t: u64 = a.trim().parse().map_err(|_| dec("bad timestamp"))?;
            let c: u8 = b.trim().parse().map_err(|_| dec("bad channel"))?;
            tags.push(t, c);
        }
        if !(header_seen && have_n && have_d) {
            return Err(Error::Decode("missing tag CSV header or metadata".into()));
        }
        tags.validate().map_err(|e| Error::Decode(e.to_string()))?;
        Ok(tags)
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Option<[u8; 32]> {
    let s = s.trim();
    if s.len() != 64 {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, o) in out.iter_mut().enumerate() {
        *o = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).ok()?;
    }
    Some(out)
}

/// Detection counts on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub bin_width: f64,
    pub counts: Vec<u32>,
}

impl TimeTrace {
    /// Bins all channels (or one, if given). Events in a trailing partial bin are dropped.
    pub fn from_tags(tags: &PhotonTags, bin_width: f64, channel: Option<u8>) -> Result<Self> {
        ensure(bin_width > 0.0, || "bin width must be positive".into())?;
        let bin_ps = bin_width / PS;
        let n = (tags.duration_ps as f64 / bin_ps).floor() as usize;
        ensure(n > 0, || "bin width exceeds the record duration".into())?;
        let mut counts = vec![0u32; n];
        for (&t, &c) in tags.times_ps.iter().zip(&tags.channels) {
            if channel.is_some_and(|ch| ch != c) {
                continue;
            }
            let i = (t as f64 / bin_ps) as usize;
            if i < n {
                counts[i] += 1;
            }
        }
        Ok(TimeTrace { bin_width, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn duration(&self) -> f64 {
        self.bin_width * self.counts.len() as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_start_s,counts")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(w, "{:.12e},{c}", i as f64 * self.bin_width)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let mut starts = Vec::new();
        let mut counts = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Decode(format!("trace CSV: {e}")))?;
            let dec = |m: &str| Error::Decode(format!("trace CSV row {}: {m}", i + 1));
            let s: f64 = rec.get(0).ok_or_else(|| dec("missing start"))?.trim().parse().map_err(|_| dec("bad start"))?;
            let c: u32 = rec.get(1).ok_or_else(|| dec("missing count"))?.trim().parse().map_err(|_| dec("bad count"))?;
            starts.push(s);
            counts.push(c);
        }
        if counts.len() < 2 {
            return Err(Error::Validation("trace CSV needs at least two bins".into()));
        }
        let bin_width = starts[1] - starts[0];
        if !(bin_width > 0.0) {
            return Err(Error::Decode("trace bins must be increasing".into()));
        }
        Ok(TimeTrace { bin_width, counts })
    }
}
