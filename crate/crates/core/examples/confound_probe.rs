//! Decode from a single ICA component and from peripheral channels only,
//! with and without a class-correlated artifact.

use hwdecode::decoder::TrainConfig;
use hwdecode::eval::{self, ProbeInput};
use hwdecode::pipeline::{self, PipelineConfig};
use hwdecode::synthgen::{self, ArtifactSpec, SynthSpec, PERIPHERAL};
use hwdecode::{ica, Result};

fn main() -> Result<()> {
    let mut cfg = PipelineConfig::default();
    cfg.train = TrainConfig { max_epochs: 150, patience: 40, ..TrainConfig::default() };
    let base = SynthSpec { n_trials: 120, snr: 0.2, seed: 8, ..SynthSpec::default() };

    for artifact in [None, Some(ArtifactSpec { class_correlated: true, amplitude_uv: 20.0 })] {
        let spec = SynthSpec { artifact, ..base.clone() };
        let p = pipeline::prepare_session(&synthgen::generate_session(&spec)?, &cfg)?;
        let (ds, _) = p.epochs(&cfg.epoching)?;
        let clf = cfg.classifier_for(&ds)?;

        let chan = eval::confound_probe_channels(&ds, &PERIPHERAL, &clf, 3, 0)?;
        let model = ica::fit_ica(&p.eeg, 8, 0)?;
        let input = ProbeInput {
            eeg: &p.eeg,
            pen: p.pen.as_ref(),
            events: &p.events,
            setting: cfg.epoching.setting,
            onset: cfg.epoching.onset,
            session_id: &p.session_id,
        };
        let best = (0..model.n_components())
            .map(|ic| Ok((ic, eval::confound_probe_single_ic(&input, &model, ic, &clf, 3, 0)?.0.pooled.accuracy)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        println!(
            "artifact={:<5} peripheral-only {:.3}  best single IC {} -> {:.3}",
            artifact.is_some(),
            chan.pooled.accuracy,
            best.0,
            best.1
        );
    }
    Ok(())
}
