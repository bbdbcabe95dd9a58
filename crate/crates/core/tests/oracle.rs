//! Properties of the synthetic generator checked end to end.

use hwdecode::decoder::{self, TrainConfig};
use hwdecode::epoching::{detect_movement_onset, OnsetDetectorConfig};
use hwdecode::pipeline::{self, PipelineConfig, SyncConfig};
use hwdecode::synthgen::{self, SynthSpec};

#[test]
fn noiseless_sessions_are_separable() {
    let cfg = PipelineConfig::default();
    let spec = SynthSpec { n_trials: 160, snr: f64::INFINITY, seed: 21, ..SynthSpec::default() };
    let (ds, _) = pipeline::prepare_session(&synthgen::generate_session(&spec).unwrap(), &cfg)
        .unwrap()
        .epochs(&cfg.epoching)
        .unwrap();
    let (train, test) = ds.split_fixed_test(40).unwrap();
    let (w, _) = decoder::train(&train, &TrainConfig::default(), &cfg.net_for(&ds).unwrap()).unwrap();
    let data: Vec<_> = test.epochs().iter().map(|e| &e.data).collect();
    let probs = decoder::predict_proba(&w, &data).unwrap();
    let hits = probs.iter().zip(test.epochs()).filter(|(p, e)| decoder::argmax(p) == e.label.index()).count();
    let acc = hits as f64 / test.len() as f64;
    assert!(acc >= 0.95, "held-out accuracy {acc}");
}

#[test]
fn detected_onsets_match_truth_on_the_raw_pen_stream() {
    let s = synthgen::generate_session(&SynthSpec { n_trials: 200, snr: 1.0, seed: 4, ..SynthSpec::default() }).unwrap();
    let pen = s.pen.as_ref().unwrap();
    let synced = pipeline::synchronize(&s.eeg, &s.task_events, Some((pen, s.pen_events.as_ref().unwrap())), &SyncConfig::default()).unwrap();
    let pen = synced.pen.unwrap();
    let cfg = OnsetDetectorConfig::default();
    let close = s
        .truth
        .trials
        .iter()
        .filter(|tr| {
            let found = detect_movement_onset(&pen, (tr.fixation_s, tr.fixation_s + 1.0), &cfg).unwrap();
            found.is_some_and(|t| (t - tr.onset_s).abs() <= 0.03)
        })
        .count();
    assert!(close as f64 >= 0.99 * s.truth.trials.len() as f64, "{close}/200 within 30 ms");
}
