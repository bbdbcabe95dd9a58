use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::{Letter, Recording};
use crate::error::{Error, Result};

/// Epoching regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Motor execution, window [-200 ms, +800 ms] around detected pen onset.
    MeMovement,
    /// Motor execution, window [0, 1000 ms] from the writing cue.
    MeCue,
    /// Motor imagery, window [0, 1000 ms] from the writing cue.
    MiCue,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::MeMovement, Setting::MeCue, Setting::MiCue];

    pub fn as_str(self) -> &'static str {
        match self {
            Setting::MeMovement => "me_movement",
            Setting::MeCue => "me_cue",
            Setting::MiCue => "mi_cue",
        }
    }

    pub fn is_movement_centered(self) -> bool {
        self == Setting::MeMovement
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "me_movement" => Ok(Setting::MeMovement),
            "me_cue" => Ok(Setting::MeCue),
            "mi_cue" => Ok(Setting::MiCue),
            _ => Err(Error::InvalidArgument(format!(
                "unknown setting {s:?} (expected me-movement, me-cue or mi-cue)"
            ))),
        }
    }
}

/// One labeled window of multi-channel EEG.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub data: Array2<f32>,
    pub label: Letter,
    pub setting: Setting,
    pub onset_time_s: f64,
    pub session_id: String,
}

/// Epochs in chronological order (by onset within a session, sessions in
/// collection order). The order is load-bearing: fixed test sets are the
/// last trials of the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochDataset {
    epochs: Vec<Epoch>,
    sample_rate_hz: f64,
    channel_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct LabelHeader {
    n_epochs: usize,
    window_samples: usize,
}

#[derive(Serialize, Deserialize)]
struct LabelLine {
    label: Letter,
    setting: Setting,
    onset_time_s: f64,
    session_id: String,
}

impl EpochDataset {
    pub fn new(epochs: Vec<Epoch>, sample_rate_hz: f64, channel_names: Vec<String>) -> Result<Self> {
        if let Some(first) = epochs.first() {
            let shape = first.data.dim();
            if shape.0 != channel_names.len() {
                return Err(Error::ShapeMismatch(format!(
                    "epochs have {} channels, dataset names {}",
                    shape.0,
                    channel_names.len()
                )));
            }
            for (i, e) in epochs.iter().enumerate() {
                if e.data.dim() != shape {
                    return Err(Error::ShapeMismatch(format!(
                        "epoch {i} has shape {:?}, expected {:?}",
                        e.data.dim(),
                        shape
                    )));
                }
                if e.data.iter().any(|v| !v.is_finite()) {
                    return Err(Error::ShapeMismatch(format!("epoch {i} holds non-finite values")));
                }
            }
        }
        if !(sample_rate_hz > 0.0) {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        Ok(EpochDataset { epochs, sample_rate_hz, channel_names })
    }

    pub fn epochs(&self) -> &[Epoch] {
        &self.epochs
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    /// `(n_channels, n_window_samples)`; `None` for an empty dataset.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.epochs.first().map(|e| e.data.dim())
    }

    pub fn labels(&self) -> Vec<Letter> {
        self.epochs.iter().map(|e| e.label).collect()
    }

    pub fn class_counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for e in &self.epochs {
            c[e.label.index()] += 1;
        }
        c
    }

    /// New dataset holding the epochs at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        EpochDataset {
            epochs: indices.iter().map(|&i| self.epochs[i].clone()).collect(),
            sample_rate_hz: self.sample_rate_hz,
            channel_names: self.channel_names.clone(),
        }
    }

    /// Same epochs with per-epoch data replaced through `f`.
    pub fn map_data(&self, mut f: impl FnMut(&Array2<f32>) -> Array2<f32>) -> Result<Self> {
        let epochs = self
            .epochs
            .iter()
            .map(|e| Epoch { data: f(&e.data), ..e.clone() })
            .collect();
        EpochDataset::new(epochs, self.sample_rate_hz, self.channel_names.clone())
    }

    /// Same epochs with labels replaced (used by label-permutation controls).
    pub fn with_labels(&self, labels: &[Letter]) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::ShapeMismatch(format!("{} labels for {} epochs", labels.len(), self.len())));
        }
        let epochs = self
            .epochs
            .iter()
            .zip(labels)
            .map(|(e, &label)| Epoch { label, ..e.clone() })
            .collect();
        Ok(EpochDataset { epochs, sample_rate_hz: self.sample_rate_hz, channel_names: self.channel_names.clone() })
    }

    /// Concatenates sessions in the given (collection) order.
    pub fn concat(parts: &[EpochDataset]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("no datasets to concatenate".into()))?;
        let mut epochs = Vec::new();
        for p in parts {
            if p.channel_names != first.channel_names || p.sample_rate_hz != first.sample_rate_hz {
                return Err(Error::ShapeMismatch("datasets differ in channels or rate".into()));
            }
            epochs.extend(p.epochs.iter().cloned());
        }
        EpochDataset::new(epochs, first.sample_rate_hz, first.channel_names.clone())
    }

    /// Splits off the last `n_test` epochs as a fixed test set; everything
    /// before them is the training superset.
    pub fn split_fixed_test(&self, n_test: usize) -> Result<(EpochDataset, EpochDataset)> {
        if n_test >= self.len() {
            return Err(Error::InsufficientData(format!(
                "n_test={} must be smaller than the dataset size {}",
                n_test,
                self.len()
            )));
        }
        let cut = self.len() - n_test;
        let train: Vec<usize> = (0..cut).collect();
        let test: Vec<usize> = (cut..self.len()).collect();
        Ok((self.subset(&train), self.subset(&test)))
    }

    fn sidecar(path: &Path) -> PathBuf {
        path.with_extension("labels")
    }

    /// Writes the bundle `path` (`.rec`) plus its `.labels` sidecar.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let (n_ch, n_win) = self
            .shape()
            .ok_or_else(|| Error::InvalidArgument("cannot write an empty epoch dataset".into()))?;
        let mut all = Array2::<f32>::zeros((n_ch, n_win * self.len()));
        for (i, e) in self.epochs.iter().enumerate() {
            all.slice_mut(s![.., i * n_win..(i + 1) * n_win]).assign(&e.data);
        }
        let name = self.epochs[0].setting.as_str();
        let rec = Recording::new(name, self.channel_names.clone(), self.sample_rate_hz, 0.0, "epochs", all)?;
        rec.write(path)?;

        let mut text = serde_json::to_string(&LabelHeader { n_epochs: self.len(), window_samples: n_win })
            .expect("header serializes");
        text.push('\n');
        for e in &self.epochs {
            let line = LabelLine {
                label: e.label,
                setting: e.setting,
                onset_time_s: e.onset_time_s,
                session_id: e.session_id.clone(),
            };
            text.push_str(&serde_json::to_string(&line).expect("label serializes"));
            text.push('\n');
        }
        let side = Self::sidecar(path);
        fs::write(&side, text).map_err(|e| Error::io(side, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let rec = Recording::read(path)?;
        let side = Self::sidecar(path);
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: LabelHeader = lines
            .next()
            .ok_or_else(|| Error::MalformedHeader("empty label sidecar".into()))
            .and_then(|l| serde_json::from_str(l).map_err(|e| Error::MalformedHeader(e.to_string())))?;
        if header.n_epochs * header.window_samples != rec.n_samples() {
            return Err(Error::PayloadLengthMismatch {
                expected: header.n_epochs * header.window_samples,
                actual: rec.n_samples(),
            });
        }
        let mut epochs = Vec::with_capacity(header.n_epochs);
        for (i, line) in lines.enumerate() {
            let l: LabelLine =
                serde_json::from_str(line).map_err(|e| Error::InvalidEvent { line: i + 2, reason: e.to_string() })?;
            if i >= header.n_epochs {
                return Err(Error::MalformedHeader("more label lines than epochs".into()));
            }
            let w = header.window_samples;
            epochs.push(Epoch {
                data: rec.samples().slice(s![.., i * w..(i + 1) * w]).to_owned(),
                label: l.label,
                setting: l.setting,
                onset_time_s: l.onset_time_s,
                session_id: l.session_id,
            });
        }
        if epochs.len() != header.n_epochs {
            return Err(Error::MalformedHeader(format!(
                "{} label lines for {} epochs",
                epochs.len(),
                header.n_epochs
            )));
        }
        EpochDataset::new(epochs, rec.sample_rate_hz(), rec.channel_names().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy(n: usize) -> EpochDataset {
        let epochs = (0..n)
            .map(|i| Epoch {
                data: Array2::from_elem((2, 5), i as f32),
                label: Letter::ALL[i % 4],
                setting: Setting::MeCue,
                onset_time_s: i as f64 * 2.5,
                session_id: "s0".into(),
            })
            .collect();
        EpochDataset::new(epochs, 100.0, vec!["A".into(), "B".into()]).unwrap()
    }

    #[test]
    fn split_keeps_last_trials_for_test() {
        let d = toy(5);
        let (train, test) = d.split_fixed_test(2).unwrap();
        let onsets = |d: &EpochDataset| d.epochs().iter().map(|e| e.onset_time_s).collect::<Vec<_>>();
        assert_eq!(onsets(&train), vec![0.0, 2.5, 5.0]);
        assert_eq!(onsets(&test), vec![7.5, 10.0]);
    }

    #[test]
    fn split_sizes_for_large_dataset() {
        let d = toy(2400);
        let (train, test) = d.split_fixed_test(160).unwrap();
        assert_eq!((train.len(), test.len()), (2240, 160));
    }

    #[test]
    fn split_rejects_test_as_large_as_dataset() {
        assert!(toy(10).split_fixed_test(10).is_err());
    }

    #[test]
    fn bundle_round_trip_preserves_order() {
        let d = toy(7);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("epochs").join("me_cue.rec");
        d.write(&p).unwrap();
        assert_eq!(EpochDataset::read(&p).unwrap(), d);
    }

    #[test]
    fn mixed_shapes_rejected() {
        let mut e = toy(2).epochs().to_vec();
        e[1].data = Array2::zeros((2, 6));
        assert!(EpochDataset::new(e, 100.0, vec!["A".into(), "B".into()]).is_err());
    }

    #[test]
    fn setting_parses_cli_spelling() {
        assert_eq!("me-movement".parse::<Setting>().unwrap(), Setting::MeMovement);
        assert_eq!("mi_cue".parse::<Setting>().unwrap(), Setting::MiCue);
        assert!("cue".parse::<Setting>().is_err());
    }
}
