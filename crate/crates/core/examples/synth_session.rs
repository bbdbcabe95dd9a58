//! Generate a synthetic writing session and write it to disk.
//!
//! ```text
//! cargo run --example synth_session -- /tmp/s0
//! ```

use hwdecode::synthgen::{self, SynthSpec};
use hwdecode::{EventKind, Result};

fn main() -> Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("hwdecode-s0").display().to_string());
    let spec = SynthSpec { n_trials: 40, snr: 0.5, seed: 7, ..SynthSpec::default() };
    let s = synthgen::generate_session(&spec)?;

    println!(
        "eeg: {} ch x {} samples @ {} Hz, clock {}",
        s.eeg.n_channels(),
        s.eeg.n_samples(),
        s.eeg.sample_rate_hz(),
        s.eeg.clock_domain()
    );
    let pen = s.pen.as_ref().expect("execution sessions have a pen stream");
    println!("pen: {} samples @ {} Hz, clock {}", pen.n_samples(), pen.sample_rate_hz(), pen.clock_domain());
    let cues = s.task_events.of_kind(EventKind::LetterCue).count();
    println!("task events: {} ({cues} letter cues)", s.task_events.len());
    println!("most loaded channel: {}", s.truth.most_loaded_channel);
    for tr in s.truth.trials.iter().take(4) {
        println!("  {:?} cue {:.3}s fixation {:.3}s onset {:.3}s", tr.letter, tr.letter_cue_s, tr.fixation_s, tr.onset_s);
    }

    s.write(&dir)?;
    println!("wrote {dir}");
    Ok(())
}
