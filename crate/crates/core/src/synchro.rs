//! Photodiode-based stream synchronization.
//!
//! Task cues and pen-down events are timestamped by clocks that drift
//! relative to the amplifier. Every such event also flashes a photodiode
//! wired into the amplifier, so the flash edges give the true event times
//! on the amplifier clock. Detection runs on the raw (unfiltered) channel
//! since filtering smears the edges.

use std::fmt::Write as _;

use crate::dataio::{Event, EventStream, Recording};
use crate::error::{Error, Result};

/// Monitor photodiode channel name.
pub const PD_MONITOR: &str = "PD_MONITOR";
/// Tablet photodiode channel name.
pub const PD_TABLET: &str = "PD_TABLET";
/// Default nearest-spike search radius.
pub const DEFAULT_MAX_DIST_S: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    pub clock_domain: String,
    pub spike_times_s: Vec<f64>,
}

impl SpikeTrain {
    pub fn len(&self) -> usize {
        self.spike_times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spike_times_s.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub original_t: f64,
    pub matched_spike_t: f64,
    /// `original_t - matched_spike_t`, i.e. the latency that was removed.
    pub offset_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    pub corrections: Vec<Correction>,
    pub max_abs_offset_s: f64,
}

impl AlignmentReport {
    /// Median removed latency; used to shift a whole stream (e.g. the pen
    /// recording) onto the amplifier clock.
    pub fn median_offset_s(&self) -> f64 {
        let mut o: Vec<f64> = self.corrections.iter().map(|c| c.offset_s).collect();
        if o.is_empty() {
            return 0.0;
        }
        o.sort_by(f64::total_cmp);
        let n = o.len();
        if n % 2 == 1 {
            o[n / 2]
        } else {
            0.5 * (o[n / 2 - 1] + o[n / 2])
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# events_aligned={}", self.corrections.len()).unwrap();
        writeln!(out, "# max_abs_offset_s={}", self.max_abs_offset_s).unwrap();
        writeln!(out, "# median_offset_s={}", self.median_offset_s()).unwrap();
        writeln!(out, "original_t\tmatched_spike_t\toffset_s").unwrap();
        for c in &self.corrections {
            writeln!(out, "{}\t{}\t{}", c.original_t, c.matched_spike_t, c.offset_s).unwrap();
        }
        out
    }
}

/// Rising-edge threshold crossings of a single-channel photodiode trace.
///
/// A spike is reported at the first sample at or above `threshold` whose
/// predecessor is below it; further crossings within `debounce_s` of the
/// last reported spike are suppressed.
pub fn detect_spikes(channel: &Recording, threshold: f64, debounce_s: f64) -> Result<SpikeTrain> {
    if channel.n_channels() != 1 {
        return Err(Error::InvalidArgument(format!(
            "spike detection needs a single channel, got {}",
            channel.n_channels()
        )));
    }
    if !(threshold > 0.0) || !(debounce_s > 0.0) {
        return Err(Error::InvalidArgument("threshold and debounce must be positive".into()));
    }
    let x = channel.samples().row(0);
    let mut spikes: Vec<f64> = Vec::new();
    for i in 1..x.len() {
        let prev = f64::from(x[i - 1]);
        let cur = f64::from(x[i]);
        if prev < threshold && cur >= threshold {
            let t = channel.time_of(i);
            if spikes.last().is_none_or(|&last| t - last >= debounce_s) {
                spikes.push(t);
            }
        }
    }
    Ok(SpikeTrain { clock_domain: channel.clock_domain().to_string(), spike_times_s: spikes })
}

/// Replaces every flash-marked event's timestamp with its nearest photodiode
/// spike.
///
/// Matching is one-to-one and greedy in event time order; each spike absorbs
/// at most one event and ties go to the earlier spike. Events without a flash
/// (`blank`) inherit the correction of the closest preceding aligned event
/// (or the first aligned event if none precedes them). The output stream is
/// in the spike train's clock domain.
pub fn align_events(
    events: &EventStream,
    spikes: &SpikeTrain,
    max_dist_s: f64,
) -> Result<(EventStream, AlignmentReport)> {
    if events.is_empty() || spikes.is_empty() {
        return Err(Error::InvalidArgument("alignment needs nonempty events and spikes".into()));
    }
    if !(max_dist_s > 0.0) {
        return Err(Error::InvalidArgument("max_dist_s must be positive".into()));
    }
    let times = &spikes.spike_times_s;
    let mut used = vec![false; times.len()];
    let mut corrections = Vec::new();
    let mut shifted: Vec<Option<f64>> = vec![None; events.len()];

    for (idx, e) in events.events().iter().enumerate() {
        if !e.kind.is_flash_marked() {
            continue;
        }
        let pos = times.partition_point(|&s| s < e.t);
        let left = (0..pos).rev().find(|&j| !used[j]);
        let right = (pos..times.len()).find(|&j| !used[j]);
        let best = match (left, right) {
            (Some(l), Some(r)) => {
                if e.t - times[l] <= times[r] - e.t {
                    l
                } else {
                    r
                }
            }
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (None, None) => {
                return Err(Error::MissedFlash { index: idx, kind: e.kind.to_string(), t: e.t, max_dist_s })
            }
        };
        if (e.t - times[best]).abs() > max_dist_s {
            return Err(Error::MissedFlash { index: idx, kind: e.kind.to_string(), t: e.t, max_dist_s });
        }
        used[best] = true;
        shifted[idx] = Some(times[best]);
        corrections.push(Correction { original_t: e.t, matched_spike_t: times[best], offset_s: e.t - times[best] });
    }

    let first_offset = events
        .events()
        .iter()
        .zip(&shifted)
        .find_map(|(e, s)| s.map(|s| e.t - s))
        .unwrap_or(0.0);
    let mut last_offset = first_offset;
    let mut out = Vec::with_capacity(events.len());
    for (e, s) in events.events().iter().zip(&shifted) {
        let t = match s {
            Some(s) => {
                last_offset = e.t - s;
                *s
            }
            None => e.t - last_offset,
        };
        out.push(Event { t, ..*e });
    }

    let max_abs_offset_s = corrections.iter().map(|c| c.offset_s.abs()).fold(0.0, f64::max);
    Ok((
        EventStream::new(spikes.clock_domain.clone(), out)?,
        AlignmentReport { corrections, max_abs_offset_s },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{EventKind, Letter};
    use ndarray::Array2;

    fn pd_channel(fs: f64, dur_s: f64, pulses: &[f64], width_s: f64) -> Recording {
        let n = (fs * dur_s) as usize;
        let mut x = Array2::<f32>::zeros((1, n));
        for &p in pulses {
            let a = (p * fs).round() as usize;
            let b = ((p + width_s) * fs).round() as usize;
            for i in a..b.min(n) {
                x[[0, i]] = 1.0;
            }
        }
        Recording::new("pd", vec![PD_MONITOR.into()], fs, 0.0, "amp", x).unwrap()
    }

    fn stream(ts: &[f64]) -> EventStream {
        let ev = ts.iter().map(|&t| Event::new(t, EventKind::LetterCue, Some(Letter::L))).collect();
        EventStream::new("task", ev).unwrap()
    }

    fn train(ts: &[f64]) -> SpikeTrain {
        SpikeTrain { clock_domain: "amp".into(), spike_times_s: ts.to_vec() }
    }

    #[test]
    fn flat_channel_has_no_spikes() {
        let r = pd_channel(1000.0, 3.0, &[], 0.02);
        assert!(detect_spikes(&r, 0.5, 0.05).unwrap().is_empty());
    }

    #[test]
    fn rectangular_pulses_are_recovered_within_a_sample() {
        let r = pd_channel(1000.0, 3.0, &[1.0, 2.0], 0.02);
        let s = detect_spikes(&r, 0.5, 0.05).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.spike_times_s[0] - 1.0).abs() <= 1e-3);
        assert!((s.spike_times_s[1] - 2.0).abs() <= 1e-3);
    }

    #[test]
    fn crossings_inside_debounce_collapse() {
        // two 2 ms pulses 5 ms apart
        let r = pd_channel(1000.0, 1.0, &[0.5, 0.505], 0.002);
        let s = detect_spikes(&r, 0.5, 0.05).unwrap();
        assert_eq!(s.spike_times_s.len(), 1);
    }

    #[test]
    fn late_event_snaps_to_nearest_spike() {
        let (out, rep) = align_events(&stream(&[10.080]), &train(&[10.0, 11.0]), 0.2).unwrap();
        assert_eq!(out.events()[0].t, 10.0);
        assert!((rep.corrections[0].offset_s - 0.080).abs() < 1e-12);
        assert_eq!(out.clock_domain(), "amp");
    }

    #[test]
    fn event_on_spike_is_unchanged() {
        let (out, rep) = align_events(&stream(&[1.0]), &train(&[1.0, 2.0]), 0.2).unwrap();
        assert_eq!(out.events()[0].t, 1.0);
        assert_eq!(rep.max_abs_offset_s, 0.0);
    }

    #[test]
    fn ties_break_to_earlier_spike() {
        let (out, _) = align_events(&stream(&[1.5]), &train(&[1.0, 2.0]), 1.0).unwrap();
        assert_eq!(out.events()[0].t, 1.0);
    }

    #[test]
    fn missing_flash_is_an_error() {
        let err = align_events(&stream(&[1.0, 5.0]), &train(&[1.0]), 0.2).unwrap_err();
        assert!(matches!(err, Error::MissedFlash { index: 1, .. }), "{err}");
    }

    #[test]
    fn matching_is_one_to_one() {
        // both events are closest to 1.0; the second must take 1.15
        let (out, _) = align_events(&stream(&[1.02, 1.05]), &train(&[1.0, 1.15]), 0.2).unwrap();
        let t: Vec<f64> = out.events().iter().map(|e| e.t).collect();
        assert_eq!(t, vec![1.0, 1.15]);
    }

    #[test]
    fn blank_events_follow_preceding_correction() {
        let ev = vec![
            Event::new(1.05, EventKind::LetterCue, Some(Letter::V)),
            Event::new(1.85, EventKind::Blank, None),
        ];
        let s = EventStream::new("task", ev).unwrap();
        let (out, rep) = align_events(&s, &train(&[1.0]), 0.2).unwrap();
        assert_eq!(rep.corrections.len(), 1);
        assert!((out.events()[1].t - 1.80).abs() < 1e-12);
    }
}
