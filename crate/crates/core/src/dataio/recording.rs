use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"HWREC01\n";

/// A uniformly sampled multi-channel time series.
///
/// Samples are stored as `f32` `[n_channels, n_samples]`, which is also the
/// on-disk precision, so a write/read cycle is bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    name: String,
    channel_names: Vec<String>,
    sample_rate_hz: f64,
    start_time_s: f64,
    clock_domain: String,
    samples: Array2<f32>,
}

impl Recording {
    pub fn new(
        name: impl Into<String>,
        channel_names: Vec<String>,
        sample_rate_hz: f64,
        start_time_s: f64,
        clock_domain: impl Into<String>,
        samples: Array2<f32>,
    ) -> Result<Self> {
        let rec = Recording {
            name: name.into(),
            channel_names,
            sample_rate_hz,
            start_time_s,
            clock_domain: clock_domain.into(),
            samples,
        };
        rec.validate()?;
        Ok(rec)
    }

    fn validate(&self) -> Result<()> {
        let (n_ch, n_s) = self.samples.dim();
        if n_ch != self.channel_names.len() {
            return Err(Error::InvalidRecording(format!(
                "{} channel names for {} rows",
                self.channel_names.len(),
                n_ch
            )));
        }
        if n_s == 0 {
            return Err(Error::InvalidRecording("recording has no samples".into()));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidRecording(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if !self.start_time_s.is_finite() {
            return Err(Error::InvalidRecording("start time must be finite".into()));
        }
        if let Some(((c, s), _)) = self.samples.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { channel: c, sample: s });
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    pub fn clock_domain(&self) -> &str {
        &self.clock_domain
    }

    pub fn samples(&self) -> &Array2<f32> {
        &self.samples
    }

    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate_hz
    }

    /// Time of the last sample.
    pub fn end_time_s(&self) -> f64 {
        self.time_of(self.n_samples() - 1)
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.start_time_s + index as f64 / self.sample_rate_hz
    }

    /// Nearest sample index for time `t` (may be negative or past the end).
    pub fn index_of(&self, t: f64) -> i64 {
        ((t - self.start_time_s) * self.sample_rate_hz).round() as i64
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channel_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn channel(&self, name: &str) -> Result<ArrayView1<'_, f32>> {
        let i = self.channel_index(name)?;
        Ok(self.samples.row(i))
    }

    /// Same metadata, new sample matrix (channel count must match).
    pub fn with_samples(&self, samples: Array2<f32>) -> Result<Self> {
        Recording::new(
            self.name.clone(),
            self.channel_names.clone(),
            self.sample_rate_hz,
            self.start_time_s,
            self.clock_domain.clone(),
            samples,
        )
    }

    /// Same metadata with a different rate (used by resampling).
    pub fn with_rate_and_samples(&self, sample_rate_hz: f64, samples: Array2<f32>) -> Result<Self> {
        Recording::new(
            self.name.clone(),
            self.channel_names.clone(),
            sample_rate_hz,
            self.start_time_s,
            self.clock_domain.clone(),
            samples,
        )
    }

    /// Re-expresses the recording in another clock domain.
    pub fn with_clock(&self, clock_domain: &str, start_time_s: f64) -> Result<Self> {
        let mut out = self.clone();
        out.clock_domain = clock_domain.to_string();
        out.start_time_s = start_time_s;
        out.validate()?;
        Ok(out)
    }

    pub fn select_channels<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| self.channel_index(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let samples = self.samples.select(Axis(0), &idx);
        Recording::new(
            self.name.clone(),
            names.iter().map(|n| n.as_ref().to_string()).collect(),
            self.sample_rate_hz,
            self.start_time_s,
            self.clock_domain.clone(),
            samples,
        )
    }

    /// Removes the named channels; names that are not present are ignored.
    pub fn drop_channels<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let keep: Vec<&str> = self
            .channel_names
            .iter()
            .map(String::as_str)
            .filter(|c| !names.iter().any(|n| n.as_ref() == *c))
            .collect();
        self.select_channels(&keep)
    }

    /// Samples as `f64` rows, the working precision of the processing code.
    pub fn to_f64(&self) -> Array2<f64> {
        self.samples.mapv(f64::from)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut header = String::new();
        header.push_str("format_version=1\n");
        push_kv(&mut header, "name", &self.name)?;
        push_kv(&mut header, "clock_domain", &self.clock_domain)?;
        push_kv(&mut header, "sample_rate_hz", &self.sample_rate_hz.to_string())?;
        push_kv(&mut header, "start_time_s", &self.start_time_s.to_string())?;
        push_kv(&mut header, "n_channels", &self.n_channels().to_string())?;
        push_kv(&mut header, "n_samples", &self.n_samples().to_string())?;
        for ch in &self.channel_names {
            push_kv(&mut header, "channel", ch)?;
        }

        let mut buf = Vec::with_capacity(12 + header.len() + 4 * self.samples.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
        buf.extend_from_slice(header.as_bytes());
        // frame-major: column by column
        for frame in self.samples.axis_iter(Axis(1)) {
            for v in frame.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(Error::MalformedHeader("missing HWREC01 magic".into()));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header_end = 12usize
            .checked_add(hlen)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::MalformedHeader("header length exceeds file size".into()))?;
        let header = std::str::from_utf8(&bytes[12..header_end])
            .map_err(|_| Error::MalformedHeader("header is not UTF-8".into()))?;

        let mut name = None;
        let mut clock = None;
        let mut rate = None;
        let mut start = None;
        let mut n_channels = None;
        let mut n_samples = None;
        let mut channels = Vec::new();
        for line in header.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::MalformedHeader(format!("line without `=`: {line:?}")))?;
            match k {
                "format_version" => {
                    if v != "1" {
                        return Err(Error::MalformedHeader(format!("unsupported format_version {v}")));
                    }
                }
                "name" => name = Some(v.to_string()),
                "clock_domain" => clock = Some(v.to_string()),
                "sample_rate_hz" => rate = Some(parse_num::<f64>(k, v)?),
                "start_time_s" => start = Some(parse_num::<f64>(k, v)?),
                "n_channels" => n_channels = Some(parse_num::<usize>(k, v)?),
                "n_samples" => n_samples = Some(parse_num::<usize>(k, v)?),
                "channel" => channels.push(v.to_string()),
                other => return Err(Error::MalformedHeader(format!("unknown key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::MalformedHeader(format!("missing key `{k}`"));
        let n_channels = n_channels.ok_or_else(|| missing("n_channels"))?;
        let n_samples = n_samples.ok_or_else(|| missing("n_samples"))?;
        if channels.len() != n_channels {
            return Err(Error::MalformedHeader(format!(
                "n_channels={} but {} channel entries",
                n_channels,
                channels.len()
            )));
        }
        let payload = &bytes[header_end..];
        let expected = n_channels * n_samples * 4;
        if payload.len() != expected {
            return Err(Error::PayloadLengthMismatch { expected, actual: payload.len() });
        }
        let mut samples = Array2::<f32>::zeros((n_channels, n_samples));
        for (i, chunk) in payload.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            samples[[i % n_channels, i / n_channels]] = v;
        }
        Recording::new(
            name.ok_or_else(|| missing("name"))?,
            channels,
            rate.ok_or_else(|| missing("sample_rate_hz"))?,
            start.ok_or_else(|| missing("start_time_s"))?,
            clock.ok_or_else(|| missing("clock_domain"))?,
            samples,
        )
    }
}

fn push_kv(out: &mut String, k: &str, v: &str) -> Result<()> {
    if v.contains('\n') || v.contains('\r') {
        return Err(Error::InvalidArgument(format!("header value for `{k}` contains a newline")));
    }
    out.push_str(k);
    out.push('=');
    out.push_str(v);
    out.push('\n');
    Ok(())
}

fn parse_num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::MalformedHeader(format!("bad value for `{k}`: {v:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn small() -> Recording {
        let samples = Array2::from_shape_fn((2, 10), |(c, s)| (c as f32 + 1.0) * s as f32 * 0.1 - 0.3);
        Recording::new("t", vec!["A".into(), "B".into()], 1000.0, 1.25, "amp", samples).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let r = small();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.rec");
        r.write(&p).unwrap();
        let back = Recording::read(&p).unwrap();
        assert_eq!(r, back);
        for (a, b) in r.samples().iter().zip(back.samples().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn payload_size_follows_format() {
        let samples = Array2::<f32>::zeros((32, 60_000));
        let names = (0..32).map(|i| format!("C{i}")).collect();
        let r = Recording::new("big", names, 1000.0, 0.0, "amp", samples).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("big.rec");
        r.write(&p).unwrap();
        let bytes = fs::read(&p).unwrap();
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        assert_eq!(bytes.len() - 12 - hlen, 32 * 60_000 * 4);
    }

    #[test]
    fn header_declaring_more_channels_than_payload_is_rejected() {
        let r = small();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.rec");
        r.write(&p).unwrap();
        let bytes = fs::read(&p).unwrap();
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[12..12 + hlen]).unwrap();
        let header = header.replace("n_channels=2", "n_channels=3") + "channel=C\n";
        let mut forged = Vec::new();
        forged.extend_from_slice(MAGIC);
        forged.extend_from_slice(&(header.len() as u32).to_le_bytes());
        forged.extend_from_slice(header.as_bytes());
        forged.extend_from_slice(&bytes[12 + hlen..]);
        let err = Recording::from_bytes(&forged).unwrap_err();
        assert!(err.to_string().contains("payload length mismatch"), "{err}");
    }

    #[test]
    fn non_finite_payload_is_rejected() {
        let r = small();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.rec");
        r.write(&p).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(Recording::from_bytes(&bytes), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn constructor_checks_invariants() {
        let z = Array2::<f32>::zeros((2, 0));
        assert!(Recording::new("e", vec!["A".into(), "B".into()], 100.0, 0.0, "c", z).is_err());
        let z = Array2::<f32>::zeros((2, 3));
        assert!(Recording::new("e", vec!["A".into()], 100.0, 0.0, "c", z.clone()).is_err());
        assert!(Recording::new("e", vec!["A".into(), "B".into()], 0.0, 0.0, "c", z).is_err());
    }

    #[test]
    fn channel_selection() {
        let r = small();
        let b = r.select_channels(&["B"]).unwrap();
        assert_eq!(b.n_channels(), 1);
        assert_eq!(b.samples().row(0), r.samples().row(1));
        assert_eq!(r.drop_channels(&["A"]).unwrap(), b);
        assert!(matches!(r.select_channels(&["Z"]), Err(Error::UnknownChannel(_))));
    }
}
