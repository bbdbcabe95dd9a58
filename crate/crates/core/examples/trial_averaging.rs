//! SNR-boosted evaluation: average k same-class test epochs, then classify.

use hwdecode::decoder::TrainConfig;
use hwdecode::eval::{self, DEFAULT_K_VALUES};
use hwdecode::pipeline::{self, PipelineConfig};
use hwdecode::synthgen::{self, SynthSpec};
use hwdecode::Result;

fn main() -> Result<()> {
    let mut cfg = PipelineConfig::default();
    cfg.synth = SynthSpec { n_trials: 160, snr: 1.0, seed: 4, ..SynthSpec::default() };
    cfg.train = TrainConfig { max_epochs: 150, patience: 40, ..TrainConfig::default() };
    let (ds, _) = pipeline::prepare_session(&synthgen::generate_session(&cfg.synth)?, &cfg)?.epochs(&cfg.epoching)?;

    let clf = cfg.classifier_for(&ds)?;
    let reports = eval::kfold_snr_boosted(&ds, 2, &DEFAULT_K_VALUES, &clf, 0)?;
    println!("k\tn_test\taccuracy\tdropped");
    for r in &reports {
        println!("{}\t{}\t{:.3}\t{}", r.k, r.report.n_test, r.report.accuracy, r.report.dropped);
    }
    Ok(())
}
