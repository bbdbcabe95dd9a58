//! Declarative run configuration and the stage functions shared by the
//! command-line tool and the reproduction checks.
//!
//! A run is described by one TOML file; every table and key is optional
//! and unknown keys are rejected:
//!
//! ```toml
//! [synth]
//! n_trials = 400
//! seed = 0
//!
//! [epoching]
//! setting = "me_movement"
//!
//! [train]
//! max_epochs = 300
//!
//! [eval]
//! folds = 5
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::dataio::{EpochDataset, EventStream, Recording, SessionLayout, Setting};
use crate::decoder::{EEGNetConfig, TrainConfig};
use crate::epoching::{build_dataset, BuildReport, OnsetDetectorConfig};
use crate::error::{Error, Result};
use crate::eval::{kfold_cv, EEGNetClassifier, SweepConfig, DEFAULT_K_VALUES};
use crate::ica::{self, IcaConfig, IcaModel};
use crate::seeds::fingerprint;
use crate::sigproc::{self, PreprocessConfig};
use crate::synchro::{self, AlignmentReport, DEFAULT_MAX_DIST_S, PD_MONITOR, PD_TABLET};
use crate::synthgen::{self, Calibration, Session, SynthSpec, PERIPHERAL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyncConfig {
    /// Photodiode level counted as a flash.
    pub threshold: f64,
    pub debounce_s: f64,
    pub max_dist_s: f64,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig { threshold: 0.5, debounce_s: 0.05, max_dist_s: DEFAULT_MAX_DIST_S }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IcaStageConfig {
    /// Components to extract; all channels when absent.
    pub components: Option<usize>,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    /// Components removed by `ica apply`.
    pub reject: Vec<usize>,
}

impl Default for IcaStageConfig {
    fn default() -> Self {
        let c = IcaConfig::default();
        IcaStageConfig { components: None, seed: 0, tol: c.tol, max_iter: c.max_iter, reject: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpochingConfig {
    pub setting: Setting,
    pub onset: OnsetDetectorConfig,
}

impl Default for EpochingConfig {
    fn default() -> Self {
        EpochingConfig { setting: Setting::MeMovement, onset: OnsetDetectorConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub folds: usize,
    pub seed: u64,
    pub sweep: SweepConfig,
    pub k_values: Vec<usize>,
    pub probe_channels: Vec<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 5,
            seed: 0,
            sweep: SweepConfig::default(),
            k_values: DEFAULT_K_VALUES.to_vec(),
            probe_channels: PERIPHERAL.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub synth: SynthSpec,
    pub sync: SyncConfig,
    pub preprocess: PreprocessConfig,
    pub ica: IcaStageConfig,
    pub epoching: EpochingConfig,
    /// Architecture; input shape is taken from the data.
    pub net: EEGNetConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().replace('\n', " ")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(self)
    }

    /// Architecture adjusted to a dataset's shape.
    pub fn net_for(&self, ds: &EpochDataset) -> Result<EEGNetConfig> {
        let (c, t) = ds.shape().ok_or_else(|| Error::InsufficientData("empty epoch dataset".into()))?;
        let net = EEGNetConfig { n_channels: c, n_samples: t, ..self.net };
        net.validate()?;
        Ok(net)
    }

    pub fn classifier_for(&self, ds: &EpochDataset) -> Result<EEGNetClassifier> {
        Ok(EEGNetClassifier::new(self.net_for(ds)?, self.train))
    }
}

/// Event streams and pen recording moved onto the amplifier clock.
#[derive(Debug, Clone)]
pub struct Synced {
    pub events: EventStream,
    pub pen: Option<Recording>,
    pub task_report: AlignmentReport,
    pub pen_report: Option<AlignmentReport>,
}

fn photodiode(eeg: &Recording, name: &str) -> Result<Recording> {
    eeg.select_channels(&[name])
}

/// Realigns task events to monitor-photodiode spikes and shifts the pen
/// stream by the median pen-down latency.
pub fn synchronize(
    eeg: &Recording,
    task_events: &EventStream,
    pen: Option<(&Recording, &EventStream)>,
    cfg: &SyncConfig,
) -> Result<Synced> {
    let spikes = synchro::detect_spikes(&photodiode(eeg, PD_MONITOR)?, cfg.threshold, cfg.debounce_s)?;
    let (events, task_report) = synchro::align_events(task_events, &spikes, cfg.max_dist_s)?;
    let (pen, pen_report) = match pen {
        None => (None, None),
        Some((rec, pen_events)) => {
            let spikes = synchro::detect_spikes(&photodiode(eeg, PD_TABLET)?, cfg.threshold, cfg.debounce_s)?;
            let (_, report) = synchro::align_events(pen_events, &spikes, cfg.max_dist_s)?;
            let shifted = rec.with_clock(eeg.clock_domain(), rec.start_time_s() - report.median_offset_s())?;
            (Some(shifted), Some(report))
        }
    };
    Ok(Synced { events, pen, task_report, pen_report })
}

/// Filters and resamples the EEG (photodiode channels dropped) and brings
/// the pen stream to the same rate.
pub fn preprocess_streams(
    eeg: &Recording,
    pen: Option<&Recording>,
    cfg: &PreprocessConfig,
) -> Result<(Recording, Option<Recording>)> {
    let pd: Vec<&str> =
        [PD_MONITOR, PD_TABLET].into_iter().filter(|n| eeg.channel_names().iter().any(|c| c == n)).collect();
    let eeg = sigproc::preprocess(&eeg.drop_channels(&pd)?, cfg)?;
    let pen = match (pen, cfg.resample_hz) {
        (Some(p), Some(hz)) if p.sample_rate_hz() != hz => Some(sigproc::resample(p, hz)?),
        (p, _) => p.cloned(),
    };
    Ok((eeg, pen))
}

pub fn fit_ica_stage(eeg: &Recording, cfg: &IcaStageConfig) -> Result<IcaModel> {
    let k = cfg.components.unwrap_or(eeg.n_channels());
    ica::fit_ica_with(eeg, k, cfg.seed, &IcaConfig { tol: cfg.tol, max_iter: cfg.max_iter })
}

/// Synchronized, preprocessed continuous data of one session.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub eeg: Recording,
    pub pen: Option<Recording>,
    pub events: EventStream,
    pub session_id: String,
}

impl Prepared {
    pub fn epochs(&self, cfg: &EpochingConfig) -> Result<(EpochDataset, BuildReport)> {
        build_dataset(&self.eeg, self.pen.as_ref(), &self.events, cfg.setting, &cfg.onset, &self.session_id)
    }

    /// Same streams with the EEG replaced (e.g. after ICA cleaning).
    pub fn with_eeg(&self, eeg: Recording) -> Self {
        Prepared { eeg, ..self.clone() }
    }
}

/// Sync and preprocess an in-memory session.
pub fn prepare_session(session: &Session, cfg: &PipelineConfig) -> Result<Prepared> {
    let pen = session.pen.as_ref().zip(session.pen_events.as_ref());
    let synced = synchronize(&session.eeg, &session.task_events, pen, &cfg.sync)?;
    let (eeg, pen) = preprocess_streams(&session.eeg, synced.pen.as_ref(), &cfg.preprocess)?;
    Ok(Prepared { eeg, pen, events: synced.events, session_id: session.session_id.clone() })
}

/// Sync and preprocess a session directory.
pub fn prepare_dir(dir: impl AsRef<Path>, cfg: &PipelineConfig) -> Result<Prepared> {
    let layout = SessionLayout::new(dir.as_ref());
    let eeg = Recording::read(layout.eeg())?;
    let task = EventStream::read(layout.task_events())?;
    let pen = if layout.pen().exists() {
        Some((Recording::read(layout.pen())?, EventStream::read(layout.pen_events())?))
    } else {
        None
    };
    let synced = synchronize(&eeg, &task, pen.as_ref().map(|(r, e)| (r, e)), &cfg.sync)?;
    let (eeg, pen) = preprocess_streams(&eeg, synced.pen.as_ref(), &cfg.preprocess)?;
    let session_id = layout.dir.file_name().map_or("session".into(), |n| n.to_string_lossy().into_owned());
    Ok(Prepared { eeg, pen, events: synced.events, session_id })
}

/// Finds an SNR whose `folds`-fold accuracy for `cfg.epoching.setting`
/// lands in `band`, generating a fresh session per probe.
pub fn calibrate(cfg: &PipelineConfig, band: (f64, f64)) -> Result<Calibration> {
    synthgen::calibrate_snr(band, |snr| {
        let spec = SynthSpec { snr, ..cfg.synth.clone() };
        let prepared = prepare_session(&synthgen::generate_session(&spec)?, cfg)?;
        let (ds, _) = prepared.epochs(&cfg.epoching)?;
        Ok(kfold_cv(&ds, cfg.eval.folds, &cfg.classifier_for(&ds)?, cfg.eval.seed)?.pooled.accuracy)
    })
}

/// Provenance record written next to every command's outputs. Wall-clock
/// data lives only here, never in reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_fingerprint: String,
    pub seeds: Vec<u64>,
    pub started_unix_s: u64,
    pub elapsed_s: f64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn start(command: &str, cfg: &PipelineConfig, seeds: Vec<u64>) -> (Self, std::time::Instant) {
        let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        (
            RunManifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                config_fingerprint: cfg.fingerprint(),
                seeds,
                started_unix_s: started,
                elapsed_s: 0.0,
                outputs: Vec::new(),
            },
            std::time::Instant::now(),
        )
    }

    /// Writes `manifest-<command>.json` into `dir`.
    pub fn finish(mut self, clock: std::time::Instant, dir: &Path) -> Result<PathBuf> {
        self.elapsed_s = clock.elapsed().as_secs_f64();
        let path = dir.join(format!("manifest-{}.json", self.command.replace(' ', "-")));
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let err = PipelineConfig::from_toml("[train]\neppochs = 5\n").unwrap_err();
        assert!(err.to_string().contains("eppochs"), "{err}");
        let err = PipelineConfig::from_toml("colour = 1\n").unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(PipelineConfig::from_toml("").unwrap(), c);
        let c2 = PipelineConfig::from_toml("[eval]\nfolds = 4\n").unwrap();
        assert_eq!(c2.eval.folds, 4);
        assert_ne!(c.fingerprint(), c2.fingerprint());
    }

    #[test]
    fn synced_session_realigns_and_epochs() {
        let cfg = PipelineConfig { synth: SynthSpec { n_trials: 20, ..Default::default() }, ..Default::default() };
        let s = synthgen::generate_session(&cfg.synth).unwrap();
        let p = prepare_session(&s, &cfg).unwrap();
        assert_eq!(p.eeg.n_channels(), 32);
        assert_eq!(p.eeg.sample_rate_hz(), 100.0);
        assert_eq!(p.pen.as_ref().unwrap().clock_domain(), "amp");
        let fix: Vec<f64> = p.events.of_kind(crate::EventKind::FixationCue).map(|e| e.t).collect();
        for (t, tr) in fix.iter().zip(&s.truth.trials) {
            assert!((t - tr.fixation_s).abs() <= 1e-3);
        }
        let (ds, rep) = p.epochs(&cfg.epoching).unwrap();
        assert_eq!(ds.len() + rep.dropped.len(), 20);
        assert!(rep.dropped.is_empty());
        for (e, tr) in ds.epochs().iter().zip(&s.truth.trials) {
            assert!((e.onset_time_s - tr.onset_s).abs() <= 0.03, "{} vs {}", e.onset_time_s, tr.onset_s);
        }
    }
}
