//! Signal conditioning: notch, band-pass and resampling of recordings.
//!
//! All filters are applied forward then backward (zero phase). Band-pass is
//! a 4th-order Butterworth high-pass edge cascaded with a 4th-order
//! Butterworth low-pass edge; the notch is a single biquad with Q = 30.
//!
//! Downsampling first applies a zero-phase 4th-order low-pass at
//! `0.45 * target_hz` (45 Hz when going to 100 Hz): the 70 Hz upper band
//! edge is above the 50 Hz Nyquist of the decimated stream, and the useful
//! content only reaches ~40 Hz.

pub mod iir;
pub mod resample;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataio::Recording;
use crate::error::{Error, Result};
use iir::Sos;

pub const NOTCH_Q: f64 = 30.0;
pub const BANDPASS_ORDER: usize = 4;
pub const GUARD_ORDER: usize = 4;
/// Guard low-pass cutoff as a fraction of the target rate.
pub const GUARD_FRACTION: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterSpec {
    Notch { freq_hz: f64, q: f64 },
    Bandpass { low_hz: f64, high_hz: f64, order: usize },
    Lowpass { cutoff_hz: f64, order: usize },
}

impl FilterSpec {
    pub fn design(&self, fs: f64) -> Result<Sos> {
        match *self {
            FilterSpec::Notch { freq_hz, q } => iir::notch(freq_hz, q, fs),
            FilterSpec::Bandpass { low_hz, high_hz, order } => iir::butter_bandpass(order, low_hz, high_hz, fs),
            FilterSpec::Lowpass { cutoff_hz, order } => iir::butter_lowpass(order, cutoff_hz, fs),
        }
    }

    pub fn apply(&self, rec: &Recording) -> Result<Recording> {
        let sos = self.design(rec.sample_rate_hz())?;
        apply_sos(rec, &sos)
    }
}

/// Rows of `data` filtered independently with `f`.
pub(crate) fn map_rows(data: &Array2<f64>, n_out: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((data.nrows(), n_out));
    for (src, mut dst) in data.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        let row = src.to_vec();
        let y = f(&row);
        dst.assign(&ndarray::ArrayView1::from(&y[..]));
    }
    out
}

fn to_f32(a: &Array2<f64>) -> Array2<f32> {
    a.mapv(|v| v as f32)
}

fn apply_sos(rec: &Recording, sos: &Sos) -> Result<Recording> {
    let data = rec.to_f64();
    let out = map_rows(&data, rec.n_samples(), |x| iir::filtfilt(sos, x));
    rec.with_samples(to_f32(&out))
}

/// Zero-phase notch at `f0_hz` (Q = 30).
pub fn notch(rec: &Recording, f0_hz: f64) -> Result<Recording> {
    FilterSpec::Notch { freq_hz: f0_hz, q: NOTCH_Q }.apply(rec)
}

/// Zero-phase 4th-order Butterworth band-pass.
pub fn bandpass(rec: &Recording, low_hz: f64, high_hz: f64) -> Result<Recording> {
    FilterSpec::Bandpass { low_hz, high_hz, order: BANDPASS_ORDER }.apply(rec)
}

/// Zero-phase 4th-order Butterworth low-pass.
pub fn lowpass(rec: &Recording, cutoff_hz: f64) -> Result<Recording> {
    FilterSpec::Lowpass { cutoff_hz, order: GUARD_ORDER }.apply(rec)
}

/// Polyphase resampling to `target_hz`.
///
/// Output length is `round(n_in * target / source)`; `start_time_s` is kept
/// so sample `m` of the output sits at `start + m / target_hz`.
pub fn resample(rec: &Recording, target_hz: f64) -> Result<Recording> {
    let source = rec.sample_rate_hz();
    let (up, down) = resample::ratio(source, target_hz)?;
    if up == 1 && down == 1 {
        return Ok(rec.clone());
    }
    let mut data = rec.to_f64();
    if down > up {
        let guard = iir::butter_lowpass(GUARD_ORDER, GUARD_FRACTION * target_hz, source)?;
        data = map_rows(&data, rec.n_samples(), |x| iir::filtfilt(&guard, x));
    }
    let h = resample::design_prototype(up, down);
    let n_out = ((rec.n_samples() * up) as f64 / down as f64).round() as usize;
    if n_out == 0 {
        return Err(Error::InvalidArgument("resampled recording would be empty".into()));
    }
    let out = map_rows(&data, n_out, |x| resample::polyphase(x, up, down, &h));
    rec.with_rate_and_samples(target_hz, to_f32(&out))
}

/// Notch → band-pass → resample, each step optional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub notch_hz: Option<f64>,
    pub band_hz: Option<(f64, f64)>,
    pub resample_hz: Option<f64>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig { notch_hz: Some(60.0), band_hz: Some((0.3, 70.0)), resample_hz: Some(100.0) }
    }
}

pub fn preprocess(rec: &Recording, cfg: &PreprocessConfig) -> Result<Recording> {
    let mut out = match cfg.notch_hz {
        Some(f0) => notch(rec, f0)?,
        None => rec.clone(),
    };
    if let Some((lo, hi)) = cfg.band_hz {
        out = bandpass(&out, lo, hi)?;
    }
    if let Some(hz) = cfg.resample_hz {
        out = resample(&out, hz)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, fs: f64, dur: f64) -> Recording {
        let n = (fs * dur) as usize;
        let x = Array2::from_shape_fn((1, n), |(_, i)| (2.0 * PI * freq * i as f64 / fs).sin() as f32);
        Recording::new("s", vec!["X".into()], fs, 0.0, "amp", x).unwrap()
    }

    fn interior_rms(r: &Recording, margin_s: f64) -> f64 {
        let m = (margin_s * r.sample_rate_hz()) as usize;
        let x = r.samples().row(0);
        let seg = &x.as_slice().unwrap()[m..x.len() - m];
        (seg.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>() / seg.len() as f64).sqrt()
    }

    #[test]
    fn zero_in_zero_out() {
        let z = Recording::new("z", vec!["X".into()], 1000.0, 0.0, "amp", Array2::zeros((1, 5000))).unwrap();
        assert!(notch(&z, 60.0).unwrap().samples().iter().all(|&v| v == 0.0));
        assert!(bandpass(&z, 0.3, 70.0).unwrap().samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn notch_removes_60hz_keeps_10hz() {
        let x60 = sine(60.0, 1000.0, 10.0);
        let ratio = interior_rms(&notch(&x60, 60.0).unwrap(), 1.0) / interior_rms(&x60, 1.0);
        assert!(ratio <= 0.1, "60 Hz ratio {ratio}");
        let x10 = sine(10.0, 1000.0, 10.0);
        let db = 20.0 * (interior_rms(&notch(&x10, 60.0).unwrap(), 1.0) / interior_rms(&x10, 1.0)).log10();
        assert!(db.abs() <= 1.0, "10 Hz {db} dB");
    }

    #[test]
    fn bandpass_kills_dc_passes_10hz() {
        let dc = Recording::new("d", vec!["X".into()], 1000.0, 0.0, "amp", Array2::from_elem((1, 10_000), 1.0))
            .unwrap();
        assert!(interior_rms(&bandpass(&dc, 0.3, 70.0).unwrap(), 1.0) <= 0.05);
        let x10 = sine(10.0, 1000.0, 10.0);
        let db = 20.0 * (interior_rms(&bandpass(&x10, 0.3, 70.0).unwrap(), 1.0) / interior_rms(&x10, 1.0)).log10();
        assert!(db.abs() <= 1.0, "10 Hz {db} dB");
    }

    #[test]
    fn invalid_bands_error() {
        let x = sine(10.0, 100.0, 2.0);
        assert!(notch(&x, 50.0).is_err());
        assert!(bandpass(&x, 0.3, 70.0).is_err());
        assert!(bandpass(&x, 20.0, 10.0).is_err());
    }

    #[test]
    fn resample_lengths() {
        let x = sine(5.0, 1000.0, 10.0);
        let y = resample(&x, 100.0).unwrap();
        assert_eq!(y.n_samples(), 1000);
        assert_eq!(y.sample_rate_hz(), 100.0);
        assert_eq!(y.start_time_s(), x.start_time_s());
        let pen = sine(2.0, 200.0, 5.0);
        assert_eq!(resample(&pen, 100.0).unwrap().n_samples(), 500);
        let same = resample(&y, 100.0).unwrap();
        assert_eq!(same, y);
    }

    #[test]
    fn resampled_35hz_matches_analytic_samples() {
        let x = sine(35.0, 1000.0, 10.0);
        let y = resample(&x, 100.0).unwrap();
        let got: Vec<f64> = y.samples().row(0).iter().map(|&v| f64::from(v)).collect();
        let want: Vec<f64> = (0..got.len()).map(|m| (2.0 * PI * 35.0 * m as f64 / 100.0).sin()).collect();
        // interior only
        let (g, w) = (&got[50..950], &want[50..950]);
        let dot: f64 = g.iter().zip(w).map(|(a, b)| a * b).sum();
        let ng: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nw: f64 = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(dot / (ng * nw) > 0.99, "corr {}", dot / (ng * nw));
    }

    #[test]
    fn filters_keep_channel_names() {
        let names = vec!["A".to_string(), "B".to_string()];
        let r = Recording::new("r", names.clone(), 1000.0, 0.0, "amp", Array2::from_elem((2, 3000), 0.5)).unwrap();
        let out = preprocess(&r, &PreprocessConfig::default()).unwrap();
        assert_eq!(out.channel_names(), &names[..]);
        assert_eq!(out.n_samples(), 300);
    }
}
