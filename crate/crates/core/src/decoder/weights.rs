use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::EEGNetConfig;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"HWNET01\n";
const FORMAT_VERSION: u32 = 1;

/// Offsets of each parameter tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub temporal: usize,
    pub spatial: usize,
    pub bn2_gamma: usize,
    pub bn2_beta: usize,
    pub separable: usize,
    pub pointwise: usize,
    pub bn3_gamma: usize,
    pub bn3_beta: usize,
    pub dense: usize,
    pub bias: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(c: &EEGNetConfig) -> Self {
        let m = c.n_maps();
        let f2 = c.separable_filters;
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let temporal = take(c.temporal_filters * c.temporal_kernel_len);
        let spatial = take(m * c.n_channels);
        let bn2_gamma = take(m);
        let bn2_beta = take(m);
        let separable = take(m * c.separable_kernel_len);
        let pointwise = take(f2 * m);
        let bn3_gamma = take(f2);
        let bn3_beta = take(f2);
        let dense = take(c.n_classes * c.n_features());
        let bias = take(c.n_classes);
        Layout { temporal, spatial, bn2_gamma, bn2_beta, separable, pointwise, bn3_gamma, bn3_beta, dense, bias, total: at }
    }

    /// `(name, start, len)` of every tensor, in storage order.
    pub fn tensors(&self) -> [(&'static str, usize, usize); 10] {
        let s = [
            ("temporal", self.temporal),
            ("spatial", self.spatial),
            ("bn2_gamma", self.bn2_gamma),
            ("bn2_beta", self.bn2_beta),
            ("separable", self.separable),
            ("pointwise", self.pointwise),
            ("bn3_gamma", self.bn3_gamma),
            ("bn3_beta", self.bn3_beta),
            ("dense", self.dense),
            ("bias", self.bias),
        ];
        let mut out = [("", 0, 0); 10];
        for i in 0..10 {
            let end = if i + 1 < 10 { s[i + 1].1 } else { self.total };
            out[i] = (s[i].0, s[i].1, end - s[i].1);
        }
        out
    }
}

/// Per-channel input standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// All trainable parameters plus normalization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub(crate) config: EEGNetConfig,
    pub(crate) params: Vec<f64>,
    pub(crate) bn2_mean: Vec<f64>,
    pub(crate) bn2_var: Vec<f64>,
    pub(crate) bn3_mean: Vec<f64>,
    pub(crate) bn3_var: Vec<f64>,
    pub(crate) norm: Option<ChannelNorm>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    config: EEGNetConfig,
    n_params: usize,
    standardized: bool,
}

impl ModelWeights {
    /// Uniform fan-in initialization; BN scales at 1 and shifts at 0.
    pub fn init(config: &EEGNetConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let l = Layout::new(config);
        let mut p = vec![0.0; l.total];
        let mut fill = |start: usize, len: usize, fan_in: usize| {
            let b = 1.0 / (fan_in as f64).sqrt();
            for v in &mut p[start..start + len] {
                *v = rng.random_range(-b..b);
            }
        };
        let c = config;
        fill(l.temporal, l.spatial - l.temporal, c.temporal_kernel_len);
        fill(l.spatial, l.bn2_gamma - l.spatial, c.n_channels);
        fill(l.separable, l.pointwise - l.separable, c.separable_kernel_len);
        fill(l.pointwise, l.bn3_gamma - l.pointwise, c.n_maps());
        fill(l.dense, l.bias - l.dense, c.n_features());
        p[l.bn2_gamma..l.bn2_beta].fill(1.0);
        p[l.bn3_gamma..l.bn3_beta].fill(1.0);
        let m = c.n_maps();
        let f2 = c.separable_filters;
        Ok(ModelWeights {
            config: *config,
            params: p,
            bn2_mean: vec![0.0; m],
            bn2_var: vec![1.0; m],
            bn3_mean: vec![0.0; f2],
            bn3_var: vec![1.0; f2],
            norm: None,
        })
    }

    pub fn config(&self) -> &EEGNetConfig {
        &self.config
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn channel_norm(&self) -> Option<&ChannelNorm> {
        self.norm.as_ref()
    }

    pub fn set_channel_norm(&mut self, norm: Option<ChannelNorm>) -> Result<()> {
        if let Some(n) = &norm {
            let c = self.config.n_channels;
            if n.mean.len() != c || n.std.len() != c || n.std.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::ShapeMismatch(format!("channel norm must hold {c} means and positive stds")));
            }
        }
        self.norm = norm;
        Ok(())
    }

    /// Dense classifier weights, `n_classes × n_features`, row-major.
    pub fn dense_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        let l = self.layout();
        let (a, b) = self.params.split_at_mut(l.bias);
        (&mut a[l.dense..], &mut b[..self.config.n_classes])
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        let norm = self.norm.iter().flat_map(|n| n.mean.iter().chain(&n.std));
        self.params
            .iter()
            .chain(&self.bn2_mean)
            .chain(&self.bn2_var)
            .chain(&self.bn3_mean)
            .chain(&self.bn3_var)
            .chain(norm)
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            format_version: FORMAT_VERSION,
            config: self.config,
            n_params: self.params.len(),
            standardized: self.norm.is_some(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(12 + json.len() + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for v in self.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::ModelFormat(m.to_string());
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(bad("not a weights file (bad magic)"));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
        let h: Header = serde_json::from_slice(body).map_err(|e| Error::ModelFormat(format!("header: {e}")))?;
        if h.format_version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported format version {}", h.format_version)));
        }
        h.config.validate()?;
        let l = Layout::new(&h.config);
        if l.total != h.n_params {
            return Err(bad("parameter count does not match embedded config"));
        }
        let (m, f2, c) = (h.config.n_maps(), h.config.separable_filters, h.config.n_channels);
        let n_values = l.total + 2 * m + 2 * f2 + if h.standardized { 2 * c } else { 0 };
        let payload = &bytes[12 + hlen..];
        if payload.len() != 8 * n_values {
            return Err(Error::PayloadLengthMismatch { expected: 8 * n_values, actual: payload.len() });
        }
        let mut vals = payload.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()));
        let mut take = |n: usize| -> Vec<f64> { vals.by_ref().take(n).collect() };
        let params = take(l.total);
        let bn2_mean = take(m);
        let bn2_var = take(m);
        let bn3_mean = take(f2);
        let bn3_var = take(f2);
        let norm = h.standardized.then(|| ChannelNorm { mean: take(c), std: take(c) });
        let w = ModelWeights { config: h.config, params, bn2_mean, bn2_var, bn3_mean, bn3_var, norm };
        if !w.is_finite() {
            return Err(bad("non-finite value in weights"));
        }
        Ok(w)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
