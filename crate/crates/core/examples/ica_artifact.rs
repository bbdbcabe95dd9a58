//! Fit FastICA on a session with a planted artifact, find the artifact
//! component by template correlation and project it out.

use hwdecode::pipeline::{self, PipelineConfig};
use hwdecode::synthgen::{self, ArtifactSpec, SynthSpec};
use hwdecode::{ica, sigproc, Recording, Result};
use ndarray::Array2;

fn main() -> Result<()> {
    let spec = SynthSpec {
        n_trials: 40,
        snr: 0.5,
        artifact: Some(ArtifactSpec { class_correlated: true, amplitude_uv: 20.0 }),
        seed: 11,
        ..SynthSpec::default()
    };
    let session = synthgen::generate_session(&spec)?;
    let prepared = pipeline::prepare_session(&session, &PipelineConfig::default())?;
    let eeg = &prepared.eeg;

    let model = ica::fit_ica(eeg, 16, 0)?;
    println!("{} components from {} channels", model.n_components(), model.n_channels());

    // artifact course at the working rate
    let course = session.truth.artifact_course.clone().expect("artifact planted");
    let raw = Recording::new("artifact", vec!["a".into()], spec.sample_rate_hz, 0.0, "amp", Array2::from_shape_vec((1, course.len()), course).unwrap())?;
    let mut template: Vec<f64> = sigproc::resample(&raw, eeg.sample_rate_hz())?.samples().row(0).iter().map(|&v| f64::from(v)).collect();
    template.resize(eeg.n_samples(), 0.0);

    let mut scores = model.template_scores(eeg, &template)?;
    scores.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (ic, r) in scores.iter().take(3) {
        println!("IC {ic:>2}  |r| = {r:.3}");
    }
    let top = scores[0].0;

    let fp1 = eeg.channel_index("Fp1")?;
    let power = |r: &Recording| r.samples().row(fp1).iter().map(|&v| f64::from(v).powi(2)).sum::<f64>();
    let cleaned = model.reject(eeg, &[top])?;
    println!("Fp1 power before {:.3e}, after rejecting IC {top}: {:.3e}", power(eeg), power(&cleaned));
    Ok(())
}
