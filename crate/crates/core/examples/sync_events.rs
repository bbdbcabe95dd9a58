//! Realign delayed task events onto photodiode flashes.

use hwdecode::pipeline::SyncConfig;
use hwdecode::synchro::{self, PD_MONITOR};
use hwdecode::synthgen::{self, SynthSpec};
use hwdecode::Result;

fn main() -> Result<()> {
    let s = synthgen::generate_session(&SynthSpec { n_trials: 20, max_latency_s: 0.08, seed: 3, ..SynthSpec::default() })?;
    let cfg = SyncConfig::default();

    let pd = s.eeg.select_channels(&[PD_MONITOR])?;
    let spikes = synchro::detect_spikes(&pd, cfg.threshold, cfg.debounce_s)?;
    println!("{} photodiode spikes on clock {}", spikes.len(), spikes.clock_domain);

    let (aligned, report) = synchro::align_events(&s.task_events, &spikes, cfg.max_dist_s)?;
    println!("aligned {} flash-marked events, max offset {:.1} ms", report.corrections.len(), report.max_abs_offset_s * 1e3);

    let mut worst: f64 = 0.0;
    for (e, &t) in aligned.events().iter().zip(&s.truth.task_event_times_s) {
        if e.kind.is_flash_marked() {
            worst = worst.max((e.t - t).abs());
        }
    }
    println!("largest residual against ground truth: {:.3} ms", worst * 1e3);
    print!("{}", report.to_text().lines().take(8).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
