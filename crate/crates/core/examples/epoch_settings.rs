//! Movement-onset detection and the three epoch regimes.

use hwdecode::epoching::{self, OnsetDetectorConfig};
use hwdecode::pipeline::{self, EpochingConfig, PipelineConfig};
use hwdecode::synthgen::{self, Paradigm, SynthSpec};
use hwdecode::{Result, Setting};

fn main() -> Result<()> {
    let cfg = PipelineConfig::default();
    let s = synthgen::generate_session(&SynthSpec { n_trials: 20, seed: 5, ..SynthSpec::default() })?;
    let p = pipeline::prepare_session(&s, &cfg)?;
    let pen = p.pen.as_ref().expect("pen");

    let speed = epoching::pen_speed(pen)?;
    let peak = speed.iter().cloned().fold(0.0, f64::max);
    println!("pen speed peak {peak:.1} mm/s");

    let onset_cfg = OnsetDetectorConfig::default();
    for tr in s.truth.trials.iter().take(5) {
        let found = epoching::detect_movement_onset(pen, (tr.fixation_s, tr.fixation_s + 1.0), &onset_cfg)?;
        println!("true onset {:.3}  detected {:?}", tr.onset_s, found.map(|t| (t * 1e3).round() / 1e3));
    }

    for setting in [Setting::MeMovement, Setting::MeCue] {
        let (ds, rep) = p.epochs(&EpochingConfig { setting, ..cfg.epoching })?;
        let (c, t) = ds.shape().unwrap();
        println!("{}: {} epochs of {c}x{t}, {} dropped", setting.as_str(), ds.len(), rep.dropped.len());
    }

    // imagery sessions have no pen, so only cue-locked epochs exist
    let mi = synthgen::generate_session(&SynthSpec { n_trials: 20, paradigm: Paradigm::Imagery, seed: 5, ..SynthSpec::default() })?;
    let p = pipeline::prepare_session(&mi, &cfg)?;
    let (ds, _) = p.epochs(&EpochingConfig { setting: Setting::MiCue, ..cfg.epoching })?;
    println!("mi_cue: {} epochs", ds.len());
    Ok(())
}
