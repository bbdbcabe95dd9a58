//! Notch, band-pass and resampling on probe sinusoids.

use std::f64::consts::PI;

use hwdecode::sigproc::{self, PreprocessConfig};
use hwdecode::{Recording, Result};
use ndarray::Array2;

fn sine(freq: f64, fs: f64, secs: f64) -> Result<Recording> {
    let n = (fs * secs) as usize;
    let x = Array2::from_shape_fn((1, n), |(_, i)| (2.0 * PI * freq * i as f64 / fs).sin() as f32);
    Recording::new("probe", vec!["X".into()], fs, 0.0, "amp", x)
}

// RMS away from the edges
fn gain_db(out: &Recording) -> f64 {
    let x = out.samples().row(0);
    let m = x.len() / 5;
    let seg: Vec<f64> = x.iter().skip(m).take(x.len() - 2 * m).map(|&v| f64::from(v)).collect();
    let rms = (seg.iter().map(|v| v * v).sum::<f64>() / seg.len() as f64).sqrt();
    20.0 * (rms / std::f64::consts::FRAC_1_SQRT_2).log10()
}

fn main() -> Result<()> {
    println!("freq_hz\tnotch60_db\tbandpass_db");
    for f in [0.1, 1.0, 10.0, 40.0, 55.0, 60.0, 65.0, 100.0, 200.0] {
        let x = sine(f, 1000.0, 20.0)?;
        let n = gain_db(&sigproc::notch(&x, 60.0)?);
        let b = gain_db(&sigproc::bandpass(&x, 0.3, 70.0)?);
        println!("{f}\t{n:.2}\t{b:.2}");
    }

    let x = sine(12.0, 1000.0, 5.0)?;
    let y = sigproc::preprocess(&x, &PreprocessConfig::default())?;
    println!("preprocess: {} samples @ {} Hz -> {} samples @ {} Hz", x.n_samples(), x.sample_rate_hz(), y.n_samples(), y.sample_rate_hz());
    Ok(())
}
