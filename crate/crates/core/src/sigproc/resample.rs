//! Rational-ratio polyphase resampling.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Zero-crossings of the prototype sinc kept on each side, per unit of
/// `max(up, down)`.
const HALF_ZEROS: usize = 10;
const KAISER_BETA: f64 = 5.0;
/// Anti-alias cutoff as a fraction of the narrower Nyquist band.
const ROLLOFF: f64 = 0.9;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn as_integer_rate(hz: f64) -> Option<u64> {
    let r = hz.round();
    ((hz - r).abs() < 1e-9 && r >= 1.0).then_some(r as u64)
}

/// Reduced `(up, down)` factors for `source_hz -> target_hz`.
pub fn ratio(source_hz: f64, target_hz: f64) -> Result<(usize, usize)> {
    if !(target_hz > 0.0) || !(source_hz > 0.0) {
        return Err(Error::InvalidArgument("sample rates must be positive".into()));
    }
    let (s, t) = match (as_integer_rate(source_hz), as_integer_rate(target_hz)) {
        (Some(s), Some(t)) => (s, t),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "resampling {source_hz} Hz -> {target_hz} Hz needs integer rates"
            )))
        }
    };
    let g = gcd(s, t);
    let (up, down) = ((t / g) as usize, (s / g) as usize);
    if up > 1 && down > 1 && t > s {
        return Err(Error::InvalidArgument(format!(
            "upsampling by the non-integer ratio {t}/{s} is unsupported"
        )));
    }
    Ok((up, down))
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc low-pass at the upsampled rate, unity DC gain per phase.
pub fn design_prototype(up: usize, down: usize) -> Vec<f64> {
    let m = up.max(down);
    let half = HALF_ZEROS * m;
    let len = 2 * half + 1;
    let fc = ROLLOFF * 0.5 / m as f64;
    let denom = bessel_i0(KAISER_BETA);
    let mut h: Vec<f64> = (0..len)
        .map(|i| {
            let n = i as f64 - half as f64;
            let sinc = if n == 0.0 { 2.0 * fc } else { (2.0 * PI * fc * n).sin() / (PI * n) };
            let r = n / half as f64;
            let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / denom;
            sinc * w
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in &mut h {
        *v *= up as f64 / sum;
    }
    h
}

/// Resamples `x` by `up/down`. Output sample `m` sits at input time
/// `m * down / up`; input edges are extended by mirror reflection.
pub fn polyphase(x: &[f64], up: usize, down: usize, h: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    let n_out = ((n_in * up) as f64 / down as f64).round() as usize;
    if up == 1 && down == 1 {
        return x.to_vec();
    }
    let len = h.len() as i64;
    let delay = (len - 1) / 2;
    let up_i = up as i64;
    let last = n_in as i64 - 1;
    let reflect = |j: i64| -> f64 {
        let mut j = j;
        if last == 0 {
            return x[0];
        }
        loop {
            if j < 0 {
                j = -j;
            } else if j > last {
                j = 2 * last - j;
            } else {
                return x[j as usize];
            }
        }
    };
    (0..n_out)
        .map(|m| {
            let n = m as i64 * down as i64 + delay;
            // input samples j with 0 <= n - j*up < len
            let j_hi = n.div_euclid(up_i);
            let j_lo = (n - len + 1 + up_i - 1).div_euclid(up_i);
            let mut acc = 0.0;
            for j in j_lo..=j_hi {
                let k = n - j * up_i;
                acc += h[k as usize] * reflect(j);
            }
            acc
        })
        .collect()
}
