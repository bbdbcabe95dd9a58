//! Movement-onset detection and epoch extraction.
//!
//! Three regimes produce 1 s windows at the working rate:
//! * `me_movement`: [-200 ms, +800 ms] around the detected pen onset;
//! * `me_cue` / `mi_cue`: [0, 1000 ms] from the fixation cross, which is
//!   the cue to write.
//!
//! Movement trials whose onset cannot be detected are dropped and itemized
//! in the [`BuildReport`], never imputed.

use serde::{Deserialize, Serialize};

use crate::dataio::{Epoch, EpochDataset, EventKind, EventStream, Letter, Recording, Setting};
use crate::error::{Error, Result};

pub const WINDOW_S: f64 = 1.0;
pub const MOVEMENT_PRE_S: f64 = 0.2;
/// Onset search window after the fixation cue.
pub const ONSET_SEARCH_S: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnsetDetectorConfig {
    pub speed_threshold_mm_per_s: f64,
    pub sustain_ms: f64,
}

impl Default for OnsetDetectorConfig {
    fn default() -> Self {
        OnsetDetectorConfig { speed_threshold_mm_per_s: 10.0, sustain_ms: 30.0 }
    }
}

impl OnsetDetectorConfig {
    fn validate(&self) -> Result<()> {
        if !(self.speed_threshold_mm_per_s > 0.0 && self.sustain_ms > 0.0) {
            return Err(Error::InvalidArgument("onset threshold and sustain must be positive".into()));
        }
        Ok(())
    }
}

/// How a window is placed around its anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterRule {
    /// Window starts 200 ms before the anchor.
    Movement,
    /// Window starts at the anchor.
    Cue,
}

impl CenterRule {
    pub fn for_setting(setting: Setting) -> Self {
        if setting.is_movement_centered() {
            CenterRule::Movement
        } else {
            CenterRule::Cue
        }
    }

    pub fn window_start(self, anchor_s: f64) -> f64 {
        match self {
            CenterRule::Movement => anchor_s - MOVEMENT_PRE_S,
            CenterRule::Cue => anchor_s,
        }
    }
}

/// Pen speed by central differences, in mm/s; the first and last samples
/// have no central difference and are reported as 0.
pub fn pen_speed(pen: &Recording) -> Result<Vec<f64>> {
    let xi = pen.channel_index("x")?;
    let yi = pen.channel_index("y")?;
    if pen.n_channels() != 2 {
        return Err(Error::InvalidArgument(format!("pen stream must hold exactly x and y, got {:?}", pen.channel_names())));
    }
    let x = pen.samples().row(xi);
    let y = pen.samples().row(yi);
    let n = pen.n_samples();
    let inv = pen.sample_rate_hz() / 2.0;
    let mut v = vec![0.0; n];
    for i in 1..n.saturating_sub(1) {
        let dx = f64::from(x[i + 1]) - f64::from(x[i - 1]);
        let dy = f64::from(y[i + 1]) - f64::from(y[i - 1]);
        v[i] = dx.hypot(dy) * inv;
    }
    Ok(v)
}

/// First time in `window` where pen speed exceeds the threshold and stays
/// above it for `sustain_ms`.
pub fn detect_movement_onset(pen: &Recording, window: (f64, f64), cfg: &OnsetDetectorConfig) -> Result<Option<f64>> {
    cfg.validate()?;
    let (t0, t1) = window;
    let eps = 0.5 / pen.sample_rate_hz();
    if !(t0 <= t1) || t0 < pen.start_time_s() - eps || t1 > pen.end_time_s() + eps {
        return Err(Error::InvalidArgument(format!(
            "onset window ({t0:.3}, {t1:.3}) outside pen recording ({:.3}, {:.3})",
            pen.start_time_s(),
            pen.end_time_s()
        )));
    }
    let speed = pen_speed(pen)?;
    Ok(first_sustained(&speed, pen, window, cfg))
}

fn first_sustained(speed: &[f64], pen: &Recording, (t0, t1): (f64, f64), cfg: &OnsetDetectorConfig) -> Option<f64> {
    let n = speed.len() as i64;
    let sustain = ((cfg.sustain_ms / 1000.0 * pen.sample_rate_hz()).round() as usize).max(1);
    let i0 = pen.index_of(t0).max(1);
    let i1 = pen.index_of(t1).min(n - 2);
    let thr = cfg.speed_threshold_mm_per_s;
    (i0..=i1)
        .map(|i| i as usize)
        .find(|&i| i + sustain <= speed.len() && speed[i..i + sustain].iter().all(|&v| v > thr))
        .map(|i| pen.time_of(i))
}

/// Cuts one 1 s epoch.
pub fn extract_epoch(
    eeg: &Recording,
    rule: CenterRule,
    anchor_s: f64,
    label: Letter,
    setting: Setting,
    session_id: &str,
    trial: &str,
) -> Result<Epoch> {
    let fs = eeg.sample_rate_hz();
    let n_win = (WINDOW_S * fs).round() as usize;
    let start_t = rule.window_start(anchor_s);
    let start = eeg.index_of(start_t);
    let end = start + n_win as i64;
    if start < 0 || end > eeg.n_samples() as i64 {
        return Err(Error::WindowOutOfBounds {
            trial: trial.to_string(),
            start: start_t,
            end: start_t + WINDOW_S,
            rec_start: eeg.start_time_s(),
            rec_end: eeg.end_time_s(),
        });
    }
    let data = eeg.samples().slice(ndarray::s![.., start as usize..end as usize]).to_owned();
    Ok(Epoch { data, label, setting, onset_time_s: anchor_s, session_id: session_id.to_string() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedTrial {
    pub trial: usize,
    pub fixation_s: f64,
    pub label: Letter,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub n_trials: usize,
    pub n_epochs: usize,
    pub dropped: Vec<DroppedTrial>,
}

/// One epoch per letter trial of `events` (which must already be on the
/// EEG clock). Labels come from the letter cue preceding each fixation cue.
pub fn build_dataset(
    eeg: &Recording,
    pen: Option<&Recording>,
    events: &EventStream,
    setting: Setting,
    onset_cfg: &OnsetDetectorConfig,
    session_id: &str,
) -> Result<(EpochDataset, BuildReport)> {
    if events.clock_domain() != eeg.clock_domain() {
        return Err(Error::InvalidArgument(format!(
            "events are in clock `{}` but EEG is in `{}`; synchronize first",
            events.clock_domain(),
            eeg.clock_domain()
        )));
    }
    let speed = match (setting, pen) {
        (Setting::MeMovement, None) => {
            return Err(Error::InvalidArgument("me_movement epoching needs a pen stream".into()))
        }
        (Setting::MeMovement, Some(p)) => {
            if p.clock_domain() != eeg.clock_domain() {
                return Err(Error::InvalidArgument(format!(
                    "pen stream is in clock `{}`, EEG in `{}`",
                    p.clock_domain(),
                    eeg.clock_domain()
                )));
            }
            onset_cfg.validate()?;
            Some((p, pen_speed(p)?))
        }
        _ => None,
    };
    let rule = CenterRule::for_setting(setting);

    let mut pending: Option<Letter> = None;
    let mut epochs = Vec::new();
    let mut dropped = Vec::new();
    let mut n_trials = 0;
    for e in events.events() {
        match e.kind {
            EventKind::LetterCue => pending = e.label,
            EventKind::FixationCue => {
                let label = pending.take().ok_or_else(|| {
                    Error::InvalidArgument(format!("fixation cue at t={:.3} has no preceding letter cue", e.t))
                })?;
                let trial = n_trials;
                n_trials += 1;
                let anchor = match &speed {
                    None => e.t,
                    Some((p, v)) => {
                        let window = (e.t, e.t + ONSET_SEARCH_S);
                        let eps = 0.5 / p.sample_rate_hz();
                        if window.0 < p.start_time_s() - eps || window.1 > p.end_time_s() + eps {
                            return Err(Error::InvalidArgument(format!(
                                "trial {trial}: onset window outside the pen recording"
                            )));
                        }
                        match first_sustained(v, p, window, onset_cfg) {
                            Some(t) => t,
                            None => {
                                dropped.push(DroppedTrial {
                                    trial,
                                    fixation_s: e.t,
                                    label,
                                    reason: "no movement onset detected".into(),
                                });
                                continue;
                            }
                        }
                    }
                };
                let name = format!("trial {trial} ({label} at {:.3}s)", e.t);
                epochs.push(extract_epoch(eeg, rule, anchor, label, setting, session_id, &name)?);
            }
            _ => {}
        }
    }
    let n_epochs = epochs.len();
    let ds = EpochDataset::new(epochs, eeg.sample_rate_hz(), eeg.channel_names().to_vec())?;
    Ok((ds, BuildReport { n_trials, n_epochs, dropped }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Event;
    use ndarray::Array2;

    fn ramp_pen(fs: f64, dur: f64, t_start: f64, speed: f64) -> Recording {
        let n = (fs * dur) as usize;
        let xy = Array2::from_shape_fn((2, n), |(c, i)| {
            let t = i as f64 / fs;
            if c == 0 && t > t_start {
                (speed * (t - t_start)) as f32
            } else {
                0.0
            }
        });
        Recording::new("pen", vec!["x".into(), "y".into()], fs, 0.0, "amp", xy).unwrap()
    }

    fn eeg(fs: f64, dur: f64, n_ch: usize) -> Recording {
        let n = (fs * dur) as usize;
        let names = (0..n_ch).map(|i| format!("C{i}")).collect();
        let x = Array2::from_shape_fn((n_ch, n), |(_, i)| i as f32);
        Recording::new("eeg", names, fs, 0.0, "amp", x).unwrap()
    }

    #[test]
    fn stationary_pen_has_no_onset() {
        let pen = ramp_pen(100.0, 2.0, 10.0, 50.0);
        assert_eq!(detect_movement_onset(&pen, (0.0, 1.5), &OnsetDetectorConfig::default()).unwrap(), None);
    }

    #[test]
    fn ramp_onset_is_bracketed() {
        let pen = ramp_pen(100.0, 2.0, 0.35, 50.0);
        let t = detect_movement_onset(&pen, (0.0, 1.0), &OnsetDetectorConfig::default()).unwrap().unwrap();
        assert!((0.34..=0.38).contains(&t), "{t}");
    }

    #[test]
    fn onset_window_must_lie_inside_recording() {
        let pen = ramp_pen(100.0, 2.0, 0.35, 50.0);
        assert!(detect_movement_onset(&pen, (1.5, 2.5), &OnsetDetectorConfig::default()).is_err());
    }

    #[test]
    fn movement_window_index_arithmetic() {
        let r = eeg(100.0, 10.0, 3);
        let e = extract_epoch(&r, CenterRule::Movement, 5.0, Letter::L, Setting::MeMovement, "s", "t").unwrap();
        assert_eq!(e.data.dim(), (3, 100));
        assert_eq!(e.data[[0, 0]], 480.0);
        assert_eq!(e.data[[0, 99]], 579.0);
        let c = extract_epoch(&r, CenterRule::Cue, 5.0, Letter::L, Setting::MeCue, "s", "t").unwrap();
        assert_eq!(c.data[[0, 0]], 500.0);
        assert_eq!(c.data[[0, 99]], 599.0);
    }

    #[test]
    fn early_anchor_is_out_of_bounds() {
        let r = eeg(100.0, 10.0, 3);
        let err = extract_epoch(&r, CenterRule::Movement, 0.1, Letter::O, Setting::MeMovement, "s", "trial 7")
            .unwrap_err();
        assert!(err.to_string().contains("trial 7"), "{err}");
    }

    fn trials(n: usize) -> (EventStream, Vec<f64>) {
        let mut ev = Vec::new();
        let mut fix = Vec::new();
        for i in 0..n {
            let t = 1.0 + 3.0 * i as f64;
            ev.push(Event::new(t, EventKind::LetterCue, Some(Letter::ALL[i % 4])));
            ev.push(Event::new(t + 1.3, EventKind::FixationCue, None));
            fix.push(t + 1.3);
        }
        (EventStream::new("amp", ev).unwrap(), fix)
    }

    #[test]
    fn cue_dataset_counts_and_balance() {
        let (ev, _) = trials(40);
        let r = eeg(100.0, 125.0, 2);
        let (ds, rep) = build_dataset(&r, None, &ev, Setting::MeCue, &OnsetDetectorConfig::default(), "s").unwrap();
        assert_eq!(ds.len(), 40);
        assert_eq!(ds.class_counts(), [10; 4]);
        assert!(rep.dropped.is_empty());
        let (mi, _) = build_dataset(&r, None, &ev, Setting::MiCue, &OnsetDetectorConfig::default(), "s").unwrap();
        assert_eq!(mi.len(), 40);
    }

    #[test]
    fn stationary_trial_is_dropped() {
        let (ev, fix) = trials(40);
        let fs = 100.0;
        let n = (fs * 125.0) as usize;
        // pen moves 0.2 s after every fixation except trial 5
        let xy = Array2::from_shape_fn((2, n), |(c, i)| {
            let t = i as f64 / fs;
            if c != 0 {
                return 0.0;
            }
            let mut x = 0.0;
            for (k, &f) in fix.iter().enumerate() {
                if k != 5 && t > f + 0.2 {
                    x = 30.0 * (k as f64) + (60.0 * (t - f - 0.2)).min(30.0);
                } else if k == 5 && t > f {
                    x = 30.0 * (k as f64);
                }
            }
            x as f32
        });
        let pen = Recording::new("pen", vec!["x".into(), "y".into()], fs, 0.0, "amp", xy).unwrap();
        let r = eeg(fs, 125.0, 2);
        let (ds, rep) =
            build_dataset(&r, Some(&pen), &ev, Setting::MeMovement, &OnsetDetectorConfig::default(), "s").unwrap();
        assert_eq!(ds.len(), 39);
        assert_eq!(rep.dropped.len(), 1);
        assert_eq!(rep.dropped[0].trial, 5);
        // every anchor re-checks against the pen speed
        let v = pen_speed(&pen).unwrap();
        for e in ds.epochs() {
            let i = pen.index_of(e.onset_time_s) as usize;
            assert!(v[i] > 10.0);
        }
    }

    #[test]
    fn fixation_without_letter_is_an_error() {
        let ev = EventStream::new("amp", vec![Event::new(2.0, EventKind::FixationCue, None)]).unwrap();
        let r = eeg(100.0, 10.0, 2);
        assert!(build_dataset(&r, None, &ev, Setting::MeCue, &OnsetDetectorConfig::default(), "s").is_err());
    }

    #[test]
    fn unsynchronized_events_are_rejected() {
        let ev = EventStream::new("task", vec![]).unwrap();
        let r = eeg(100.0, 10.0, 2);
        assert!(build_dataset(&r, None, &ev, Setting::MeCue, &OnsetDetectorConfig::default(), "s").is_err());
    }
}
