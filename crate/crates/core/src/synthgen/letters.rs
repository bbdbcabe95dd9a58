//! Letter waveforms and pen paths.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::Letter;

/// Duration of the planted letter waveform.
pub const TEMPLATE_DURATION_S: f64 = 0.6;

/// A smooth band-limited waveform on `[0, duration_s)`: a sum of sinusoids
/// under a Hann taper, evaluated in continuous time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub duration_s: f64,
    pub freqs_hz: Vec<f64>,
    pub amps: Vec<f64>,
    pub phases: Vec<f64>,
    pub gain: f64,
}

impl Waveform {
    /// Random waveform with `n` components drawn in `[f_lo, f_hi]` Hz,
    /// scaled to `rms` over its support.
    pub fn random<R: Rng>(rng: &mut R, n: usize, f_lo: f64, f_hi: f64, duration_s: f64, rms: f64) -> Self {
        let mut w = Waveform {
            duration_s,
            freqs_hz: (0..n).map(|_| rng.random_range(f_lo..f_hi)).collect(),
            amps: (0..n).map(|_| rng.random_range(0.5..1.0)).collect(),
            phases: (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect(),
            gain: 1.0,
        };
        let r = w.rms(1000.0);
        w.gain = if r > 0.0 { rms / r } else { 0.0 };
        w
    }

    pub fn at(&self, tau: f64) -> f64 {
        if !(0.0..self.duration_s).contains(&tau) {
            return 0.0;
        }
        let taper = 0.5 - 0.5 * (2.0 * PI * tau / self.duration_s).cos();
        let s: f64 = self
            .freqs_hz
            .iter()
            .zip(&self.amps)
            .zip(&self.phases)
            .map(|((f, a), p)| a * (2.0 * PI * f * tau + p).sin())
            .sum();
        self.gain * taper * s
    }

    /// RMS over the support, sampled at `fs`.
    pub fn rms(&self, fs: f64) -> f64 {
        let n = (self.duration_s * fs).round() as usize;
        let ss: f64 = (0..n).map(|i| self.at(i as f64 / fs).powi(2)).sum();
        (ss / n as f64).sqrt()
    }
}

/// Polyline (or circle) traced by the pen tip, in millimetres.
fn path_vertices(letter: Letter) -> Vec<[f64; 2]> {
    match letter {
        Letter::L => vec![[0.0, 20.0], [0.0, 0.0], [12.0, 0.0]],
        Letter::V => vec![[0.0, 20.0], [7.0, 0.0], [14.0, 20.0]],
        Letter::W => vec![[0.0, 20.0], [5.0, 0.0], [10.0, 14.0], [15.0, 0.0], [20.0, 20.0]],
        Letter::O => (0..=72)
            .map(|i| {
                let a = PI / 2.0 + 2.0 * PI * i as f64 / 72.0;
                [10.0 + 10.0 * a.cos(), 10.0 + 10.0 * a.sin()]
            })
            .collect(),
    }
}

/// Pen position after a fraction `u in [0, 1]` of the path at constant speed.
pub fn pen_position(letter: Letter, u: f64) -> [f64; 2] {
    let v = path_vertices(letter);
    let seg: Vec<f64> = v.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).collect();
    let total: f64 = seg.iter().sum();
    let mut remaining = u.clamp(0.0, 1.0) * total;
    for (i, &len) in seg.iter().enumerate() {
        if remaining <= len || i == seg.len() - 1 {
            let f = if len > 0.0 { (remaining / len).min(1.0) } else { 0.0 };
            return [v[i][0] + f * (v[i + 1][0] - v[i][0]), v[i][1] + f * (v[i + 1][1] - v[i][1])];
        }
        remaining -= len;
    }
    *v.last().unwrap()
}

pub fn path_length_mm(letter: Letter) -> f64 {
    path_vertices(letter).windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn waveform_has_requested_rms_and_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = Waveform::random(&mut rng, 5, 2.0, 12.0, 0.6, 5.0);
        assert!((w.rms(1000.0) - 5.0).abs() < 1e-9);
        assert_eq!(w.at(-0.01), 0.0);
        assert_eq!(w.at(0.6), 0.0);
        assert!(w.at(0.0).abs() < 1e-12);
    }

    #[test]
    fn pen_paths_start_and_end() {
        assert_eq!(pen_position(Letter::L, 0.0), [0.0, 20.0]);
        assert_eq!(pen_position(Letter::L, 1.0), [12.0, 0.0]);
        let o0 = pen_position(Letter::O, 0.0);
        let o1 = pen_position(Letter::O, 1.0);
        assert!((o0[0] - o1[0]).abs() < 1e-9 && (o0[1] - o1[1]).abs() < 1e-9);
        assert!((path_length_mm(Letter::L) - 32.0).abs() < 1e-12);
    }
}
