//! Learning curve over nested stratified training subsets.

use hwdecode::decoder::TrainConfig;
use hwdecode::eval::{self, SweepConfig};
use hwdecode::pipeline::{self, PipelineConfig};
use hwdecode::synthgen::{self, SynthSpec};
use hwdecode::Result;

fn main() -> Result<()> {
    let mut cfg = PipelineConfig::default();
    cfg.synth = SynthSpec { n_trials: 200, snr: 1.0, seed: 6, ..SynthSpec::default() };
    cfg.train = TrainConfig { max_epochs: 150, patience: 40, ..TrainConfig::default() };
    let (ds, _) = pipeline::prepare_session(&synthgen::generate_session(&cfg.synth)?, &cfg)?.epochs(&cfg.epoching)?;

    let sweep = SweepConfig { n_test: 40, fractions: vec![0.25, 0.5, 1.0], seeds: vec![0, 1] };
    let r = eval::sample_complexity_sweep(&ds, &sweep, &cfg.classifier_for(&ds)?)?;
    print!("{}", r.curve.to_tsv());
    println!("test set digest {}", r.test_set_digest);
    Ok(())
}
