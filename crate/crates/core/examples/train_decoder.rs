//! Train the compact CNN on movement-locked epochs, save it and reload it.

use hwdecode::decoder::{self, EEGNetConfig, ModelWeights, TrainConfig};
use hwdecode::pipeline::{self, PipelineConfig};
use hwdecode::synthgen::{self, SynthSpec};
use hwdecode::Result;

fn main() -> Result<()> {
    let cfg = PipelineConfig::default();
    let s = synthgen::generate_session(&SynthSpec { n_trials: 160, snr: 2.0, seed: 1, ..SynthSpec::default() })?;
    let (ds, _) = pipeline::prepare_session(&s, &cfg)?.epochs(&cfg.epoching)?;
    let (train_set, test_set) = ds.split_fixed_test(40)?;

    let net = cfg.net_for(&ds)?;
    println!("network: {} parameters", net.n_params());
    let train = TrainConfig { max_epochs: 200, patience: 50, ..TrainConfig::default() };
    let (w, hist) = decoder::train(&train_set, &train, &net)?;
    let best = hist.best();
    println!("best epoch {} val acc {:.3} (stopped early: {})", hist.best_epoch, best.val_accuracy, hist.stopped_early);

    let path = std::env::temp_dir().join("hwdecode-example.hwnet");
    w.write(&path)?;
    let w = ModelWeights::read(&path)?;
    let data: Vec<_> = test_set.epochs().iter().map(|e| &e.data).collect();
    let probs = decoder::predict_proba(&w, &data)?;
    let hits = probs.iter().zip(test_set.epochs()).filter(|(p, e)| decoder::argmax(p) == e.label.index()).count();
    println!("held-out accuracy {}/{}", hits, test_set.len());

    assert_eq!(EEGNetConfig::default().n_params(), 1684);
    Ok(())
}
