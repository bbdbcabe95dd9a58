//! Stratified k-fold cross-validation with per-fold reports.

use hwdecode::decoder::TrainConfig;
use hwdecode::eval::{self, reports_to_tsv};
use hwdecode::pipeline::{self, PipelineConfig};
use hwdecode::synthgen::SynthSpec;
use hwdecode::{synthgen, Result};

fn main() -> Result<()> {
    let mut cfg = PipelineConfig::default();
    cfg.synth = SynthSpec { n_trials: 120, snr: 2.0, seed: 2, ..SynthSpec::default() };
    cfg.train = TrainConfig { max_epochs: 150, patience: 40, ..TrainConfig::default() };
    let (ds, _) = pipeline::prepare_session(&synthgen::generate_session(&cfg.synth)?, &cfg)?.epochs(&cfg.epoching)?;

    let clf = cfg.classifier_for(&ds)?;
    let cv = eval::kfold_cv(&ds, 3, &clf, 0)?;
    print!("{}", reports_to_tsv(&cv.folds));
    print!("{}", cv.pooled.to_text());
    Ok(())
}
