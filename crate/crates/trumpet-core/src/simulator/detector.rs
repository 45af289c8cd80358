//! Detector timing jitter, dead time and beam-splitter routing.

use super::rng::{substream, Stream};
use super::tags::{PhotonTags, PS};
use super::DetectorModel;
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Applies Gaussian jitter (then re-sorts) and per-channel dead time.
/// Events jittered outside [0, duration] are lost.
pub fn apply_detector(tags: &PhotonTags, det: &DetectorModel, seed: u64) -> Result<PhotonTags> {
    det.validate()?;
    let mut events: Vec<(u64, u8)> = if det.jitter_sigma > 0.0 {
        let mut rng = substream(seed, Stream::Jitter);
        let sigma_ps = det.jitter_sigma / PS;
        let end = tags.duration_ps as f64;
        tags.times_ps
            .iter()
            .zip(&tags.channels)
            .filter_map(|(&t, &c)| {
                let n: f64 = rng.sample(StandardNormal);
                let j = (t as f64 + sigma_ps * n).round();
                (j >= 0.0 && j <= end).then_some((j as u64, c))
            })
            .collect()
    } else {
        tags.times_ps.iter().copied().zip(tags.channels.iter().copied()).collect()
    };
    if det.jitter_sigma > 0.0 {
        events.sort_unstable();
    }
    let dead_ps = (det.dead_time / PS).round() as u64;
    let mut last = vec![None::<u64>; tags.n_channels as usize];
    let mut out = PhotonTags::empty(tags.n_channels, tags.duration_ps, tags.digest);
    for (t, c) in events {
        let slot = &mut last[c as usize];
        let keep = match *slot {
            None => true,
            Some(l) => t > l && t - l >= dead_ps,
        };
        if keep {
            *slot = Some(t);
            out.push(t, c);
        }
    }
    Ok(out)
}

/// Routes each event of a single-channel record to channel 0 or 1 with
/// probability 1/2.
pub fn hbt_split(tags: &PhotonTags, seed: u64) -> Result<PhotonTags> {
    if tags.n_channels != 1 {
        return Err(Error::ChannelCount {
            expected: 1,
            found: tags.n_channels as usize,
        });
    }
    let mut rng = substream(seed, Stream::Routing);
    let mut out = PhotonTags::empty(2, tags.duration_ps, tags.digest);
    out.times_ps = tags.times_ps.clone();
    out.channels = tags.times_ps.iter().map(|_| rng.random_bool(0.5) as u8).collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_detector_is_identity() {
        let mut t = PhotonTags::empty(1, 1000, [0; 32]);
        for i in 0..10 {
            t.push(i * 10 + 1, 0);
        }
        let d = DetectorModel {
            jitter_sigma: 0.0,
            dead_time: 0.0,
            channels: 1,
        };
        assert_eq!(apply_detector(&t, &d, 1).unwrap(), t);
    }

    #[test]
    fn dead_time_drops_close_events() {
        let mut t = PhotonTags::empty(1, 10_000_000, [0; 32]);
        for ps in [0, 50_000, 99_999, 100_000, 250_000] {
            t.push(ps, 0);
        }
        let d = DetectorModel {
            jitter_sigma: 0.0,
            dead_time: 100e-9,
            channels: 1,
        };
        assert_eq!(apply_detector(&t, &d, 1).unwrap().times_ps, vec![0, 100_000, 250_000]);
    }

    #[test]
    fn split_requires_single_channel() {
        let t = PhotonTags::empty(2, 10, [0; 32]);
        assert!(matches!(hbt_split(&t, 0), Err(Error::ChannelCount { .. })));
    }
}
