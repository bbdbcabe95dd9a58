//! Synthetic sessions with known ground truth.
//!
//! A session follows the task timing of one trial after another: letter cue
//! (800 ms), blank (400-600 ms, uniform), fixation cross (1000 ms, the
//! writing period), blank (500 ms). Letter order is drawn in blocks of four
//! that each contain every letter, with no letter repeated back to back.
//!
//! The EEG carries a per-letter waveform (2-12 Hz, 600 ms) projected through
//! a midline-weighted spatial pattern, placed at the writing onset (fixation
//! onset plus a uniform jitter), on top of spatially correlated 1/f noise.
//! An optional frontal "eye" artifact can be planted, either with a
//! per-letter fixed waveform (class-correlated) or a fresh waveform per
//! trial. Photodiode channels flash at every cue and pen-down; the event
//! streams are then delayed by a per-event latency to mimic network jitter.
//!
//! Each random ingredient draws from its own seeded stream, so toggling the
//! artifact or changing the SNR leaves everything else identical.

pub mod letters;
pub mod noise;

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{Event, EventKind, EventStream, Letter, Montage, Recording, SessionLayout};
use crate::error::{Error, Result};
use crate::seeds::derive_seed;
use crate::synchro::{PD_MONITOR, PD_TABLET};
use letters::{Waveform, TEMPLATE_DURATION_S};

pub const LETTER_CUE_S: f64 = 0.8;
pub const BLANK_RANGE_S: (f64, f64) = (0.4, 0.6);
pub const WRITING_S: f64 = 1.0;
pub const POST_BLANK_S: f64 = 0.5;
pub const LEAD_IN_S: f64 = 2.0;
pub const FLASH_WIDTH_S: f64 = 0.02;
pub const ARTIFACT_DURATION_S: f64 = 0.8;
/// Channels with zero template loading (the peripheral probe set).
pub const PERIPHERAL: [&str; 5] = ["Fp1", "Fp2", "T8", "TP10", "P8"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Paradigm {
    /// Real writing: pen stream and pen-down flashes exist.
    Execution,
    /// Imagined writing: no pen stream.
    Imagery,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactSpec {
    pub class_correlated: bool,
    pub amplitude_uv: f64,
}

mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad snr {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub n_trials: usize,
    pub sample_rate_hz: f64,
    pub pen_rate_hz: f64,
    /// Template RMS over noise RMS at the most-loaded channel; `inf` = no noise.
    #[serde(with = "snr_serde")]
    pub snr: f64,
    pub template_rms_uv: f64,
    pub onset_jitter_s: (f64, f64),
    pub writing_duration_s: (f64, f64),
    pub artifact: Option<ArtifactSpec>,
    pub max_latency_s: f64,
    pub paradigm: Paradigm,
    pub session_id: String,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_trials: 400,
            sample_rate_hz: 1000.0,
            pen_rate_hz: 200.0,
            snr: 1.0,
            template_rms_uv: 5.0,
            onset_jitter_s: (0.05, 0.35),
            writing_duration_s: (0.45, 0.6),
            artifact: None,
            max_latency_s: 0.08,
            paradigm: Paradigm::Execution,
            session_id: "s0".into(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_trials == 0 || self.n_trials % 4 != 0 {
            return bad(format!("n_trials={} must be a positive multiple of 4", self.n_trials));
        }
        if !(self.snr > 0.0) {
            return bad(format!("snr must be positive, got {}", self.snr));
        }
        let (lo, hi) = self.onset_jitter_s;
        if !(0.0 <= lo && lo <= hi && hi + TEMPLATE_DURATION_S <= WRITING_S) {
            return bad(format!("onset jitter ({lo}, {hi}) must fit the {WRITING_S} s writing window"));
        }
        let (dlo, dhi) = self.writing_duration_s;
        if !(0.0 < dlo && dlo <= dhi && hi + dhi <= WRITING_S) {
            return bad(format!("writing duration ({dlo}, {dhi}) must fit the writing window"));
        }
        if !(self.sample_rate_hz > 0.0 && self.pen_rate_hz > 0.0) {
            return bad("sample rates must be positive".into());
        }
        if !(0.0..=0.2).contains(&self.max_latency_s) {
            return bad(format!("max_latency_s={} outside [0, 0.2]", self.max_latency_s));
        }
        if !(self.template_rms_uv > 0.0) {
            return bad("template_rms_uv must be positive".into());
        }
        Ok(())
    }

    fn rng(&self, stream: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(self.seed, stream))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTruth {
    pub letter: Letter,
    pub letter_cue_s: f64,
    pub fixation_s: f64,
    pub onset_s: f64,
    pub writing_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub trials: Vec<TrialTruth>,
    /// Letter waveforms in `Letter::ALL` order.
    pub templates: Vec<Waveform>,
    /// Template loading per EEG channel (max 1).
    pub template_pattern: Vec<f64>,
    pub artifact_pattern: Vec<f64>,
    pub most_loaded_channel: String,
    pub template_rms_uv: f64,
    pub noise_rms_uv: f64,
    pub pen_offset_s: f64,
    /// True amplifier-clock times of every task event, in stream order.
    pub task_event_times_s: Vec<f64>,
    /// Latency added to each task event.
    pub task_latencies_s: Vec<f64>,
    /// Artifact time course at the raw rate (not serialized; see `artifact.rec`).
    #[serde(skip)]
    pub artifact_course: Option<Vec<f32>>,
}

impl GroundTruth {
    pub fn onsets(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.onset_s).collect()
    }

    pub fn labels(&self) -> Vec<Letter> {
        self.trials.iter().map(|t| t.letter).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    pub session_id: String,
    /// 32 EEG channels followed by `PD_MONITOR` and `PD_TABLET`.
    pub eeg: Recording,
    /// `x`, `y` pen coordinates in the tablet clock; `None` for imagery.
    pub pen: Option<Recording>,
    pub task_events: EventStream,
    pub pen_events: Option<EventStream>,
    pub truth: GroundTruth,
}

impl Session {
    /// EEG channels only (photodiode channels dropped).
    pub fn eeg_only(&self) -> Result<Recording> {
        self.eeg.drop_channels(&[PD_MONITOR, PD_TABLET])
    }

    /// Writes `eeg.rec`, `pen.rec`, `task.evt`, `pen.evt`, `truth.json` and
    /// (if planted) `artifact.rec` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let layout = SessionLayout::new(dir.as_ref());
        fs::create_dir_all(&layout.dir).map_err(|e| Error::io(&layout.dir, e))?;
        self.eeg.write(layout.eeg())?;
        if let Some(pen) = &self.pen {
            pen.write(layout.pen())?;
        }
        self.task_events.write(layout.task_events())?;
        if let Some(pe) = &self.pen_events {
            pe.write(layout.pen_events())?;
        }
        let truth = serde_json::to_string_pretty(&self.truth).expect("truth serializes");
        fs::write(layout.truth(), truth).map_err(|e| Error::io(layout.truth(), e))?;
        if let Some(course) = &self.truth.artifact_course {
            let data = Array2::from_shape_vec((1, course.len()), course.clone()).expect("shape");
            let rec = Recording::new(
                "artifact",
                vec!["artifact".into()],
                self.eeg.sample_rate_hz(),
                self.eeg.start_time_s(),
                self.eeg.clock_domain(),
                data,
            )?;
            rec.write(layout.artifact())?;
        }
        Ok(())
    }
}

/// Letter order in blocks of four, each block a permutation of all letters,
/// never repeating a letter across block boundaries.
pub fn trial_order<R: Rng>(rng: &mut R, n_trials: usize) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::with_capacity(n_trials);
    while out.len() < n_trials {
        let mut block = Letter::ALL;
        block.shuffle(rng);
        if let Some(&last) = out.last() {
            if block[0] == last {
                let j = rng.random_range(1..4);
                block.swap(0, j);
            }
        }
        out.extend_from_slice(&block);
    }
    out.truncate(n_trials);
    out
}

/// Template spatial pattern: Gaussian bump over the central midline, zero on
/// the peripheral probe channels, peak 1.
pub fn template_pattern(montage: &Montage) -> Vec<f64> {
    let mut w: Vec<f64> = montage
        .positions()
        .iter()
        .map(|(name, [x, y])| {
            if PERIPHERAL.contains(&name.as_str()) {
                0.0
            } else {
                (-(x * x) / (2.0 * 0.25f64.powi(2)) - (y - 0.1).powi(2) / (2.0 * 0.3f64.powi(2))).exp()
            }
        })
        .collect();
    let max = w.iter().copied().fold(0.0, f64::max);
    for v in &mut w {
        *v /= max;
    }
    w
}

/// Frontal eye-artifact pattern, dominated by Fp1/Fp2.
pub fn artifact_pattern(montage: &Montage) -> Vec<f64> {
    montage
        .positions()
        .iter()
        .map(|(name, [_, y])| match name.as_str() {
            "Fp1" | "Fp2" => 1.0,
            _ => 0.4 * (-(0.95 - y).powi(2) / (2.0 * 0.25f64.powi(2))).exp(),
        })
        .collect()
}

/// Generates one session from `spec`. Deterministic in `spec.seed`.
pub fn generate_session(spec: &SynthSpec) -> Result<Session> {
    spec.validate()?;
    let montage = Montage::standard_32();
    let names = montage.names();
    let n_eeg = names.len();
    let fs = spec.sample_rate_hz;

    // trial sequence and timing
    let letters = trial_order(&mut spec.rng("order"), spec.n_trials);
    let mut timing = spec.rng("timing");
    let mut trials = Vec::with_capacity(spec.n_trials);
    let mut t = LEAD_IN_S;
    for &letter in &letters {
        let blank = timing.random_range(BLANK_RANGE_S.0..=BLANK_RANGE_S.1);
        let fixation = t + LETTER_CUE_S + blank;
        let (jl, jh) = spec.onset_jitter_s;
        let jitter = if jh > jl { timing.random_range(jl..jh) } else { jl };
        let (dl, dh) = spec.writing_duration_s;
        let dur = if dh > dl { timing.random_range(dl..dh) } else { dl };
        trials.push(TrialTruth {
            letter,
            letter_cue_s: t,
            fixation_s: fixation,
            onset_s: fixation + jitter,
            writing_duration_s: dur,
        });
        t = fixation + WRITING_S + POST_BLANK_S;
    }
    let total_s = t + LEAD_IN_S;
    let n = (total_s * fs).ceil() as usize;

    // letter templates
    let mut tpl_rng = spec.rng("templates");
    let templates: Vec<Waveform> = Letter::ALL
        .iter()
        .map(|_| Waveform::random(&mut tpl_rng, 6, 2.0, 12.0, TEMPLATE_DURATION_S, spec.template_rms_uv))
        .collect();
    let t_pattern = template_pattern(&montage);
    let peak = t_pattern.iter().enumerate().fold(0, |b, (i, &v)| if v > t_pattern[b] { i } else { b });

    // background
    let mut eeg = Array2::<f32>::zeros((n_eeg + 2, n));
    let mut noise_rms = 0.0;
    if spec.snr.is_finite() {
        let mut bg = noise::background(&mut spec.rng("noise"), n_eeg, n, fs);
        let row = bg.row(peak);
        let rms = (row.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>() / n as f64).sqrt();
        let scale = (spec.template_rms_uv / spec.snr / rms) as f32;
        bg.mapv_inplace(|v| v * scale);
        noise_rms = (bg.row(peak).iter().map(|&v| f64::from(v).powi(2)).sum::<f64>() / n as f64).sqrt();
        eeg.slice_mut(ndarray::s![..n_eeg, ..]).assign(&bg);
    }

    // planted templates
    for tr in &trials {
        let w = &templates[tr.letter.index()];
        let i0 = (tr.onset_s * fs).ceil() as usize;
        let i1 = ((tr.onset_s + TEMPLATE_DURATION_S) * fs).ceil() as usize;
        for i in i0..i1.min(n) {
            let v = w.at(i as f64 / fs - tr.onset_s);
            for (c, &p) in t_pattern.iter().enumerate() {
                if p != 0.0 {
                    eeg[[c, i]] += (p * v) as f32;
                }
            }
        }
    }

    // artifact
    let a_pattern = artifact_pattern(&montage);
    let artifact_course = spec.artifact.map(|a| {
        let mut rng = spec.rng("artifact");
        let per_letter: Vec<Waveform> = Letter::ALL
            .iter()
            .map(|_| Waveform::random(&mut rng, 3, 0.5, 3.0, ARTIFACT_DURATION_S, a.amplitude_uv))
            .collect();
        let mut course = vec![0.0f32; n];
        for tr in &trials {
            let fresh;
            let w = if a.class_correlated {
                &per_letter[tr.letter.index()]
            } else {
                fresh = Waveform::random(&mut rng, 3, 0.5, 3.0, ARTIFACT_DURATION_S, a.amplitude_uv);
                &fresh
            };
            let i0 = (tr.onset_s * fs).ceil() as usize;
            let i1 = ((tr.onset_s + ARTIFACT_DURATION_S) * fs).ceil() as usize;
            for (i, slot) in course.iter_mut().enumerate().take(i1.min(n)).skip(i0) {
                *slot = w.at(i as f64 / fs - tr.onset_s) as f32;
            }
        }
        for (c, &p) in a_pattern.iter().enumerate() {
            for (dst, &v) in eeg.row_mut(c).iter_mut().zip(&course) {
                *dst += (p as f32) * v;
            }
        }
        course
    });

    // photodiodes: monitor on both cues, tablet on pen-down
    let flash = |eeg: &mut Array2<f32>, row: usize, at: f64| {
        let i0 = (at * fs).round() as usize;
        let i1 = ((at + FLASH_WIDTH_S) * fs).round() as usize;
        for i in i0..i1.min(n) {
            eeg[[row, i]] = 1.0;
        }
    };
    for tr in &trials {
        flash(&mut eeg, n_eeg, tr.letter_cue_s);
        flash(&mut eeg, n_eeg, tr.fixation_s);
        if spec.paradigm == Paradigm::Execution {
            flash(&mut eeg, n_eeg + 1, tr.onset_s);
        }
    }

    let mut channel_names = names.clone();
    channel_names.push(PD_MONITOR.into());
    channel_names.push(PD_TABLET.into());
    let eeg = Recording::new(format!("session_{}", spec.session_id), channel_names, fs, 0.0, "amp", eeg)?;

    // task events with per-event latency
    let mut lat_rng = spec.rng("latency");
    let mut true_events = Vec::new();
    for tr in &trials {
        true_events.push(Event::new(tr.letter_cue_s, EventKind::LetterCue, Some(tr.letter)));
        true_events.push(Event::new(tr.letter_cue_s + LETTER_CUE_S, EventKind::Blank, None));
        true_events.push(Event::new(tr.fixation_s, EventKind::FixationCue, None));
        true_events.push(Event::new(tr.fixation_s + WRITING_S, EventKind::Blank, None));
    }
    let latencies: Vec<f64> = true_events.iter().map(|_| lat_rng.random_range(0.0..=spec.max_latency_s)).collect();
    let delayed: Vec<Event> =
        true_events.iter().zip(&latencies).map(|(e, l)| Event::new(e.t + l, e.kind, e.label)).collect();
    let task_events = EventStream::new("task", delayed)?;

    // pen stream in the tablet clock
    let pen_offset = lat_rng.random_range(0.0..=spec.max_latency_s);
    let (pen, pen_events) = match spec.paradigm {
        Paradigm::Imagery => (None, None),
        Paradigm::Execution => {
            let (pen, ev) = pen_stream(spec, &trials, total_s, pen_offset)?;
            (Some(pen), Some(ev))
        }
    };

    Ok(Session {
        session_id: spec.session_id.clone(),
        eeg,
        pen,
        task_events,
        pen_events,
        truth: GroundTruth {
            trials,
            templates,
            template_pattern: t_pattern,
            artifact_pattern: a_pattern,
            most_loaded_channel: names[peak].clone(),
            template_rms_uv: spec.template_rms_uv,
            noise_rms_uv: noise_rms,
            pen_offset_s: pen_offset,
            task_event_times_s: true_events.iter().map(|e| e.t).collect(),
            task_latencies_s: latencies,
            artifact_course,
        },
    })
}

fn pen_stream(spec: &SynthSpec, trials: &[TrialTruth], total_s: f64, offset: f64) -> Result<(Recording, EventStream)> {
    let fs = spec.pen_rate_hz;
    let n = (total_s * fs).ceil() as usize;
    let mut rng = spec.rng("pen");
    let mut xy = Array2::<f32>::zeros((2, n));
    let rest = [-20.0, 0.0];
    let mut next = 0;
    for i in 0..n {
        let t = i as f64 / fs;
        while next < trials.len() && t >= trials[next].fixation_s + WRITING_S + 0.25 {
            next += 1;
        }
        let pos = match trials.get(next) {
            Some(tr) if t >= tr.onset_s => {
                letters::pen_position(tr.letter, (t - tr.onset_s) / tr.writing_duration_s)
            }
            // hovering over the next letter's start point
            Some(tr) => letters::pen_position(tr.letter, 0.0),
            None => rest,
        };
        let jx: f64 = rng.random_range(-0.02..0.02);
        let jy: f64 = rng.random_range(-0.02..0.02);
        xy[[0, i]] = (pos[0] + jx) as f32;
        xy[[1, i]] = (pos[1] + jy) as f32;
    }
    let pen = Recording::new("pen", vec!["x".into(), "y".into()], fs, offset, "tablet", xy)?;
    let events = trials.iter().map(|tr| Event::new(tr.onset_s + offset, EventKind::PenSample, None)).collect();
    Ok((pen, EventStream::new("tablet", events)?))
}

/// Outcome of an SNR calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub snr: f64,
    pub accuracy: f64,
    pub iterations: usize,
}

pub const SNR_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const CALIBRATION_MAX_ITER: usize = 20;

/// Bisection (in log SNR) for an SNR whose accuracy lands in `[lo, hi]`.
///
/// `accuracy_at` maps an SNR to a decoding accuracy, normally by generating
/// a session, running the pipeline and cross-validating a fresh decoder.
/// Accuracy is assumed non-decreasing in SNR.
pub fn calibrate_snr(
    band: (f64, f64),
    mut accuracy_at: impl FnMut(f64) -> Result<f64>,
) -> Result<Calibration> {
    let (lo, hi) = band;
    if !(lo <= hi) || lo > 1.0 || hi < 0.0 {
        return Err(Error::Unreachable(format!("accuracy band [{lo}, {hi}] lies outside [0, 1]")));
    }
    let (mut a, mut b) = (SNR_BOUNDS.0.ln(), SNR_BOUNDS.1.ln());
    for it in 1..=CALIBRATION_MAX_ITER {
        let mid = 0.5 * (a + b);
        let snr = mid.exp();
        let acc = accuracy_at(snr)?;
        if (lo..=hi).contains(&acc) {
            return Ok(Calibration { snr, accuracy: acc, iterations: it });
        }
        if acc < lo {
            a = mid;
        } else {
            b = mid;
        }
    }
    Err(Error::Unreachable(format!(
        "no SNR in [{}, {}] reached accuracy band [{lo}, {hi}] within {CALIBRATION_MAX_ITER} bisection steps",
        SNR_BOUNDS.0, SNR_BOUNDS.1
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SynthSpec {
        SynthSpec { n_trials: 16, ..SynthSpec::default() }
    }

    #[test]
    fn trial_order_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let order = trial_order(&mut rng, 400);
        for l in Letter::ALL {
            assert_eq!(order.iter().filter(|&&x| x == l).count(), 100);
        }
        assert!(order.windows(2).all(|w| w[0] != w[1]));
        for block in order.chunks(4) {
            let mut b = block.to_vec();
            b.sort();
            b.dedup();
            assert_eq!(b.len(), 4);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(SynthSpec { n_trials: 10, ..small_spec() }.validate().is_err());
        assert!(SynthSpec { snr: 0.0, ..small_spec() }.validate().is_err());
        assert!(SynthSpec { onset_jitter_s: (0.05, 0.6), ..small_spec() }.validate().is_err());
        assert!(small_spec().validate().is_ok());
        assert!(SynthSpec { snr: f64::INFINITY, ..small_spec() }.validate().is_ok());
    }

    #[test]
    fn same_seed_same_session() {
        let a = generate_session(&small_spec()).unwrap();
        let b = generate_session(&small_spec()).unwrap();
        assert_eq!(a.eeg, b.eeg);
        assert_eq!(a.pen, b.pen);
        assert_eq!(a.task_events, b.task_events);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn declared_snr_matches_measured() {
        let spec = SynthSpec { snr: 0.5, ..small_spec() };
        let s = generate_session(&spec).unwrap();
        let ratio = s.truth.template_rms_uv / s.truth.noise_rms_uv;
        assert!((ratio / 0.5 - 1.0).abs() < 0.01, "{ratio}");
        // measured template RMS over the support at the peak channel
        let w = &s.truth.templates[0];
        assert!((w.rms(spec.sample_rate_hz) / spec.template_rms_uv - 1.0).abs() < 0.01);
    }

    #[test]
    fn template_has_no_peripheral_loading() {
        let m = Montage::standard_32();
        let p = template_pattern(&m);
        for (i, name) in m.names().iter().enumerate() {
            if PERIPHERAL.contains(&name.as_str()) {
                assert_eq!(p[i], 0.0);
            }
        }
        assert!((p.iter().copied().fold(0.0, f64::max) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn artifact_toggle_keeps_other_streams() {
        let plain = generate_session(&small_spec()).unwrap();
        let art = SynthSpec {
            artifact: Some(ArtifactSpec { class_correlated: true, amplitude_uv: 20.0 }),
            ..small_spec()
        };
        let with = generate_session(&art).unwrap();
        assert_eq!(plain.task_events, with.task_events);
        assert_eq!(plain.pen, with.pen);
        // non-frontal channel far from the artifact is nearly unchanged
        let c = plain.eeg.channel_index("Pz").unwrap();
        let diff: f32 = plain
            .eeg
            .samples()
            .row(c)
            .iter()
            .zip(with.eeg.samples().row(c).iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max);
        assert!(diff < 0.2, "{diff}");
    }

    #[test]
    fn class_correlated_artifact_differs_by_letter() {
        let spec = SynthSpec {
            artifact: Some(ArtifactSpec { class_correlated: true, amplitude_uv: 20.0 }),
            ..small_spec()
        };
        let s = generate_session(&spec).unwrap();
        let course = s.truth.artifact_course.as_ref().unwrap();
        let snippet = |tr: &TrialTruth| {
            let i0 = (tr.onset_s * 1000.0).ceil() as usize;
            course[i0..i0 + 700].to_vec()
        };
        let by_letter: Vec<Vec<f32>> = Letter::ALL
            .iter()
            .map(|l| snippet(s.truth.trials.iter().find(|t| t.letter == *l).unwrap()))
            .collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(by_letter[i], by_letter[j]);
            }
        }
    }

    #[test]
    fn imagery_has_no_pen() {
        let s = generate_session(&SynthSpec { paradigm: Paradigm::Imagery, ..small_spec() }).unwrap();
        assert!(s.pen.is_none() && s.pen_events.is_none());
        let pd = s.eeg.channel(PD_TABLET).unwrap();
        assert!(pd.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn calibration_bisects_a_monotone_curve() {
        // logistic accuracy oracle: 0.25 at low snr, 1.0 at high snr
        let curve = |snr: f64| Ok(0.25 + 0.75 / (1.0 + (-(snr.ln() - 0.0) * 2.0).exp()));
        let hi = calibrate_snr((0.95, 1.0), curve).unwrap();
        assert!(hi.snr > 1.0 && (0.95..=1.0).contains(&hi.accuracy));
        let lo = calibrate_snr((0.2, 0.3), curve).unwrap();
        assert!(lo.snr < 1.0 && (0.2..=0.3).contains(&lo.accuracy));
        assert!(matches!(calibrate_snr((1.1, 1.2), curve), Err(Error::Unreachable(_))));
    }

    #[test]
    fn calibration_reports_unreachable_after_budget() {
        let mut calls = 0;
        let r = calibrate_snr((0.6, 0.61), |_| {
            calls += 1;
            Ok(0.25)
        });
        assert!(matches!(r, Err(Error::Unreachable(_))));
        assert_eq!(calls, CALIBRATION_MAX_ITER);
    }
}
