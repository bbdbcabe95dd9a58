//! Second-order-section IIR design and zero-phase filtering.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// One biquad, normalized so that `a0 == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn normalized(b: [f64; 3], a: [f64; 3]) -> Self {
        let a0 = a[0];
        Biquad { b: [b[0] / a0, b[1] / a0, b[2] / a0], a: [1.0, a[1] / a0, a[2] / a0] }
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// Transposed direct-form II state for a constant input `u` held forever.
    fn steady_state(&self, u: f64) -> [f64; 2] {
        let y = self.dc_gain() * u;
        let z2 = self.b[2] * u - self.a[2] * y;
        let z1 = self.b[1] * u - self.a[1] * y + z2;
        [z1, z2]
    }

    /// Magnitude response at `f_hz`.
    pub fn magnitude(&self, f_hz: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f_hz / fs;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let nr = self.b[0] + self.b[1] * c1 + self.b[2] * c2;
        let ni = self.b[1] * s1 + self.b[2] * s2;
        let dr = self.a[0] + self.a[1] * c1 + self.a[2] * c2;
        let di = self.a[1] * s1 + self.a[2] * s2;
        ((nr * nr + ni * ni) / (dr * dr + di * di)).sqrt()
    }
}

/// A cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    pub fn then(mut self, other: Sos) -> Sos {
        self.sections.extend(other.sections);
        self
    }

    pub fn magnitude(&self, f_hz: f64, fs: f64) -> f64 {
        self.sections.iter().map(|s| s.magnitude(f_hz, fs)).product()
    }

    /// Edge padding used by [`filtfilt`].
    pub fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Runs the cascade over `x` in place, starting from `state`.
    fn run(&self, x: &mut [f64], state: &mut [[f64; 2]]) {
        for (sec, z) in self.sections.iter().zip(state.iter_mut()) {
            let [b0, b1, b2] = sec.b;
            let [_, a1, a2] = sec.a;
            let (mut z1, mut z2) = (z[0], z[1]);
            for v in x.iter_mut() {
                let xin = *v;
                let y = b0 * xin + z1;
                z1 = b1 * xin - a1 * y + z2;
                z2 = b2 * xin - a2 * y;
                *v = y;
            }
            *z = [z1, z2];
        }
    }

    /// Per-section steady state for a constant input `u` entering the cascade.
    fn steady_state(&self, u: f64) -> Vec<[f64; 2]> {
        let mut level = u;
        self.sections
            .iter()
            .map(|s| {
                let z = s.steady_state(level);
                level *= s.dc_gain();
                z
            })
            .collect()
    }
}

fn check_freq(f: f64, fs: f64, what: &str) -> Result<()> {
    if !(f > 0.0) || f >= fs / 2.0 {
        return Err(Error::FilterDesign(format!(
            "{what} {f} Hz must lie in (0, Nyquist={} Hz)",
            fs / 2.0
        )));
    }
    Ok(())
}

fn butterworth_qs(order: usize) -> Vec<f64> {
    (0..order / 2)
        .map(|k| 1.0 / (2.0 * (PI * (2 * k + 1) as f64 / (2 * order) as f64).cos()))
        .collect()
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 || order % 2 == 1 {
        return Err(Error::FilterDesign(format!("order must be even and positive, got {order}")));
    }
    Ok(())
}

/// Butterworth low-pass (bilinear transform, prewarped at the cutoff).
pub fn butter_lowpass(order: usize, cutoff_hz: f64, fs: f64) -> Result<Sos> {
    check_order(order)?;
    check_freq(cutoff_hz, fs, "cutoff")?;
    let w0 = 2.0 * PI * cutoff_hz / fs;
    let (c, s) = (w0.cos(), w0.sin());
    let sections = butterworth_qs(order)
        .into_iter()
        .map(|q| {
            let alpha = s / (2.0 * q);
            Biquad::normalized([(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0], [1.0 + alpha, -2.0 * c, 1.0 - alpha])
        })
        .collect();
    Ok(Sos { sections })
}

/// Butterworth high-pass.
pub fn butter_highpass(order: usize, cutoff_hz: f64, fs: f64) -> Result<Sos> {
    check_order(order)?;
    check_freq(cutoff_hz, fs, "cutoff")?;
    let w0 = 2.0 * PI * cutoff_hz / fs;
    let (c, s) = (w0.cos(), w0.sin());
    let sections = butterworth_qs(order)
        .into_iter()
        .map(|q| {
            let alpha = s / (2.0 * q);
            Biquad::normalized(
                [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0],
                [1.0 + alpha, -2.0 * c, 1.0 - alpha],
            )
        })
        .collect();
    Ok(Sos { sections })
}

/// Band-pass as a high-pass edge cascaded with a low-pass edge, each of the
/// given order.
pub fn butter_bandpass(order: usize, low_hz: f64, high_hz: f64, fs: f64) -> Result<Sos> {
    if !(low_hz < high_hz) {
        return Err(Error::FilterDesign(format!("band edges must satisfy low < high, got {low_hz} >= {high_hz}")));
    }
    Ok(butter_highpass(order, low_hz, fs)?.then(butter_lowpass(order, high_hz, fs)?))
}

/// Second-order notch with quality factor `q`.
pub fn notch(f0_hz: f64, q: f64, fs: f64) -> Result<Sos> {
    check_freq(f0_hz, fs, "notch frequency")?;
    if !(q > 0.0) {
        return Err(Error::FilterDesign("notch Q must be positive".into()));
    }
    let w0 = 2.0 * PI * f0_hz / fs;
    let (c, s) = (w0.cos(), w0.sin());
    let alpha = s / (2.0 * q);
    Ok(Sos { sections: vec![Biquad::normalized([1.0, -2.0 * c, 1.0], [1.0 + alpha, -2.0 * c, 1.0 - alpha])] })
}

/// Zero-phase forward-backward filtering with odd-reflection edge padding
/// and steady-state initial conditions.
pub fn filtfilt(sos: &Sos, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = sos.pad_len().min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=pad {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }

    let mut state = sos.steady_state(ext[0]);
    sos.run(&mut ext, &mut state);
    ext.reverse();
    let mut state = sos.steady_state(ext[0]);
    sos.run(&mut ext, &mut state);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn butterworth_is_3db_at_cutoff() {
        let lp = butter_lowpass(4, 45.0, 1000.0).unwrap();
        assert!((lp.magnitude(45.0, 1000.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((lp.magnitude(0.0, 1000.0) - 1.0).abs() < 1e-12);
        let hp = butter_highpass(4, 0.3, 1000.0).unwrap();
        assert!((hp.magnitude(0.3, 1000.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert!(hp.magnitude(0.0, 1000.0) < 1e-12);
    }

    #[test]
    fn notch_zero_at_center() {
        let n = notch(60.0, 30.0, 1000.0).unwrap();
        assert!(n.magnitude(60.0, 1000.0) < 1e-9);
        assert!((n.magnitude(10.0, 1000.0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn design_rejects_bad_frequencies() {
        assert!(butter_lowpass(4, 600.0, 1000.0).is_err());
        assert!(butter_bandpass(4, 30.0, 10.0, 1000.0).is_err());
        assert!(notch(500.0, 30.0, 1000.0).is_err());
        assert!(butter_lowpass(3, 10.0, 1000.0).is_err());
    }

    #[test]
    fn steady_state_start_makes_constant_input_exact() {
        let lp = butter_lowpass(4, 20.0, 1000.0).unwrap();
        let y = filtfilt(&lp, &[3.0; 200]);
        assert!(y.iter().all(|v| (v - 3.0).abs() < 1e-9));
        let hp = butter_highpass(4, 0.3, 1000.0).unwrap();
        let y = filtfilt(&hp, &[3.0; 200]);
        assert!(y.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn filtfilt_handles_tiny_inputs() {
        let lp = butter_lowpass(4, 20.0, 1000.0).unwrap();
        assert!(filtfilt(&lp, &[]).is_empty());
        assert_eq!(filtfilt(&lp, &[1.0]).len(), 1);
    }
}
