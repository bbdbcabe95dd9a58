//! Spatially correlated 1/f background noise.

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Below this frequency the 1/f amplitude law is held flat.
const PINK_FLOOR_HZ: f64 = 0.5;

/// One unit-RMS pink (1/f amplitude) series of length `n`.
pub fn pink_series<R: Rng>(rng: &mut R, n: usize, fs: f64, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let len = n.next_power_of_two().max(2);
    let mut buf: Vec<Complex<f64>> = (0..len).map(|_| Complex::new(rng.sample(StandardNormal), 0.0)).collect();
    planner.plan_fft_forward(len).process(&mut buf);
    for (i, c) in buf.iter_mut().enumerate() {
        let k = if i <= len / 2 { i } else { len - i };
        let f = k as f64 * fs / len as f64;
        *c *= if k == 0 { 0.0 } else { 1.0 / f.max(PINK_FLOOR_HZ) };
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let mut out: Vec<f64> = buf[..n].iter().map(|c| c.re).collect();
    let mean = out.iter().sum::<f64>() / n as f64;
    let rms = (out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    for v in &mut out {
        *v = (*v - mean) / rms;
    }
    out
}

/// Lower Cholesky factor of a random symmetric positive-definite matrix
/// with unit diagonal.
pub fn random_spatial_factor<R: Rng>(rng: &mut R, n: usize) -> Array2<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut c = &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5;
    let d: Vec<f64> = (0..n).map(|i| c[(i, i)].sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] /= d[i] * d[j];
        }
    }
    let l = c.cholesky().expect("SPD by construction").l();
    Array2::from_shape_fn((n, n), |(i, j)| l[(i, j)])
}

/// `[n_channels, n]` noise: spatially mixed pink noise plus a white floor
/// 20 dB below it.
pub fn background<R: Rng>(rng: &mut R, n_channels: usize, n: usize, fs: f64) -> Array2<f32> {
    let factor = random_spatial_factor(rng, n_channels);
    let mut planner = FftPlanner::new();
    let mut latent = Array2::<f32>::zeros((n_channels, n));
    for mut row in latent.outer_iter_mut() {
        let s = pink_series(rng, n, fs, &mut planner);
        for (d, v) in row.iter_mut().zip(s) {
            *d = v as f32;
        }
    }
    let mut mixed = factor.mapv(|v| v as f32).dot(&latent);
    drop(latent);
    for v in mixed.iter_mut() {
        let w: f64 = rng.sample(StandardNormal);
        *v += (0.1 * w) as f32;
    }
    mixed
}
